#include "ldmt/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace ldmt::ad {

namespace {

Var make(Mat value, std::vector<NodePtr> parents, BackwardFn fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->backward = std::move(fn);
    return Var(std::move(n));
}

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

void accumulate(Mat* slot, const Mat& g) {
    if (!slot) {
        return;
    }
    if (slot->size() == 0) {
        *slot = g;
    } else {
        *slot += g;
    }
}

}  // namespace

Var leaf(Mat value) { return make(std::move(value), {}, {}); }

NodePtr make_param(Mat value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

Mat Gradients::of(const NodePtr& n) const {
    auto it = grads_.find(n.get());
    if (it == grads_.end() || it->second.size() == 0) {
        return Mat::Zero(n->value.rows(), n->value.cols());
    }
    return it->second;
}

Mat Gradients::of(const Var& v) const { return of(v.node()); }

Gradients backward(const Var& loss, std::span<const NodePtr> wrt) {
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw std::invalid_argument("backward: loss must be 1x1");
    }
    // Iterative post-order DFS: parents appear before children in `order`.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (visited.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::unordered_set<const Node*> targets;
    for (const auto& w : wrt) {
        targets.insert(w.get());
    }
    std::unordered_set<const Node*> needed;
    for (Node* n : order) {
        bool need = targets.count(n) > 0;
        for (const auto& p : n->parents) {
            need = need || needed.count(p.get()) > 0;
        }
        if (need) {
            needed.insert(n);
        }
    }

    Gradients out;
    auto& grads = out.grads_;
    if (!needed.count(loss.node().get())) {
        return out;
    }
    grads[loss.node().get()] = Mat::Ones(1, 1);
    std::vector<Mat*> slots;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!needed.count(n) || !n->backward) {
            continue;
        }
        auto g = grads.find(n);
        if (g == grads.end() || g->second.size() == 0) {
            continue;
        }
        slots.assign(n->parents.size(), nullptr);
        for (size_t i = 0; i < n->parents.size(); ++i) {
            if (needed.count(n->parents[i].get())) {
                slots[i] = &grads[n->parents[i].get()];
            }
        }
        // The map may rehash while inserting parent slots, so look up again.
        const Mat grad_out = grads[n];
        n->backward(grad_out, slots);
        if (!targets.count(n)) {
            grads.erase(n);
        }
    }
    return out;
}

Gradients backward(const Var& loss, std::initializer_list<NodePtr> wrt) {
    std::vector<NodePtr> v(wrt);
    return backward(loss, std::span<const NodePtr>(v));
}

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimension mismatch");
    }
    Mat out;
    out.noalias() = a.value() * b.value();
    NodePtr an = a.node(), bn = b.node();
    return make(std::move(out), {an, bn}, [an, bn](const Mat& g, std::span<Mat*> pg) {
        if (pg[0]) accumulate(pg[0], g * bn->value.transpose());
        if (pg[1]) accumulate(pg[1], an->value.transpose() * g);
    });
}

Var affine(const Var& x, const Var& w, const Var& b) {
    if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
        throw std::invalid_argument("affine: shape mismatch");
    }
    Mat out;
    out.noalias() = x.value() * w.value();
    out.rowwise() += b.value().row(0);
    NodePtr xn = x.node(), wn = w.node(), bn = b.node();
    return make(std::move(out), {xn, wn, bn}, [xn, wn](const Mat& g, std::span<Mat*> pg) {
        if (pg[0]) accumulate(pg[0], g * wn->value.transpose());
        if (pg[1]) accumulate(pg[1], xn->value.transpose() * g);
        if (pg[2]) accumulate(pg[2], g.colwise().sum());
    });
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    return make(a.value() + b.value(), {a.node(), b.node()}, [](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], g);
        accumulate(pg[1], g);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "sub");
    return make(a.value() - b.value(), {a.node(), b.node()}, [](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], g);
        if (pg[1]) accumulate(pg[1], -g);
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mul");
    NodePtr an = a.node(), bn = b.node();
    return make(a.value().cwiseProduct(b.value()), {an, bn}, [an, bn](const Mat& g, std::span<Mat*> pg) {
        if (pg[0]) accumulate(pg[0], g.cwiseProduct(bn->value));
        if (pg[1]) accumulate(pg[1], g.cwiseProduct(an->value));
    });
}

Var scale(const Var& a, double s) {
    return make(a.value() * s, {a.node()}, [s](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], g * s);
    });
}

Var mul_const(const Var& a, const Mat& m) {
    require_same_shape(a.value(), m, "mul_const");
    return make(a.value().cwiseProduct(m), {a.node()}, [m](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], g.cwiseProduct(m));
    });
}

Var add_const(const Var& a, const Mat& m) {
    require_same_shape(a.value(), m, "add_const");
    return make(a.value() + m, {a.node()}, [](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], g);
    });
}

Var add_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw std::invalid_argument("add_row: shape mismatch");
    }
    Mat out = a.value();
    out.rowwise() += row.value().row(0);
    return make(std::move(out), {a.node(), row.node()}, [](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], g);
        if (pg[1]) accumulate(pg[1], g.colwise().sum());
    });
}

Var silu(const Var& a) {
    const Mat& x = a.value();
    Mat sig = (1.0 + (-x.array()).exp()).inverse().matrix();
    Mat out = x.cwiseProduct(sig);
    return make(std::move(out), {a.node()}, [x, sig](const Mat& g, std::span<Mat*> pg) {
        // d/dx x*s(x) = s + x*s*(1-s)
        Mat d = (sig.array() * (1.0 + x.array() * (1.0 - sig.array()))).matrix();
        accumulate(pg[0], g.cwiseProduct(d));
    });
}

Var tanh(const Var& a) {
    Mat out = a.value().array().tanh().matrix();
    Mat y = out;
    return make(std::move(out), {a.node()}, [y](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], (g.array() * (1.0 - y.array().square())).matrix());
    });
}

Var sigmoid(const Var& a) {
    Mat out = (1.0 + (-a.value().array()).exp()).inverse().matrix();
    Mat y = out;
    return make(std::move(out), {a.node()}, [y](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], (g.array() * y.array() * (1.0 - y.array())).matrix());
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw std::invalid_argument("concat_cols: no inputs");
    }
    Eigen::Index rows = parts[0].rows(), cols = 0;
    std::vector<NodePtr> parents;
    std::vector<Eigen::Index> widths;
    for (const auto& p : parts) {
        if (p.rows() != rows) {
            throw std::invalid_argument("concat_cols: row mismatch");
        }
        cols += p.cols();
        widths.push_back(p.cols());
        parents.push_back(p.node());
    }
    Mat out(rows, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        out.middleCols(off, p.cols()) = p.value();
        off += p.cols();
    }
    return make(std::move(out), std::move(parents), [widths](const Mat& g, std::span<Mat*> pg) {
        Eigen::Index o = 0;
        for (size_t i = 0; i < widths.size(); ++i) {
            if (pg[i]) accumulate(pg[i], g.middleCols(o, widths[i]));
            o += widths[i];
        }
    });
}

Var gather_cols(const Var& a, std::span<const Eigen::Index> index) {
    const Mat& x = a.value();
    std::vector<Eigen::Index> idx(index.begin(), index.end());
    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    Mat out(x.rows(), n);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double* src = x.row(r).data();
        double* dst = out.row(r).data();
        for (Eigen::Index j = 0; j < n; ++j) {
            dst[j] = src[idx[static_cast<size_t>(j)]];
        }
    }
    const Eigen::Index src_cols = x.cols();
    return make(std::move(out), {a.node()}, [idx, src_cols](const Mat& g, std::span<Mat*> pg) {
        if (!pg[0]) return;
        Mat d = Mat::Zero(g.rows(), src_cols);
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            const double* src = g.row(r).data();
            double* dst = d.row(r).data();
            for (size_t j = 0; j < idx.size(); ++j) {
                dst[idx[j]] += src[j];
            }
        }
        accumulate(pg[0], d);
    });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != a.value().size()) {
        throw std::invalid_argument("reshape: size mismatch");
    }
    Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
    const Eigen::Index r0 = a.rows(), c0 = a.cols();
    return make(std::move(out), {a.node()}, [r0, c0](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], Eigen::Map<const Mat>(g.data(), r0, c0));
    });
}

Var repeat_rows(const Var& row, Eigen::Index n) {
    if (row.rows() != 1) {
        throw std::invalid_argument("repeat_rows: expected a single row");
    }
    Mat out = row.value().replicate(n, 1);
    return make(std::move(out), {row.node()}, [](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], g.colwise().sum());
    });
}

Var slice_rows(const Var& a, Eigen::Index begin, Eigen::Index count) {
    if (begin < 0 || count < 0 || begin + count > a.rows()) {
        throw std::invalid_argument("slice_rows: out of range");
    }
    Mat out = a.value().middleRows(begin, count);
    const Eigen::Index r0 = a.rows(), c0 = a.cols();
    return make(std::move(out), {a.node()}, [begin, count, r0, c0](const Mat& g, std::span<Mat*> pg) {
        if (!pg[0]) return;
        Mat d = Mat::Zero(r0, c0);
        d.middleRows(begin, count) = g;
        accumulate(pg[0], d);
    });
}

Var gather_rows(const Var& a, std::span<const Eigen::Index> index) {
    std::vector<Eigen::Index> idx(index.begin(), index.end());
    Mat out(static_cast<Eigen::Index>(idx.size()), a.cols());
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= a.rows()) {
            throw std::invalid_argument("gather_rows: index out of range");
        }
        out.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
    }
    const Eigen::Index r0 = a.rows(), c0 = a.cols();
    return make(std::move(out), {a.node()}, [idx, r0, c0](const Mat& g, std::span<Mat*> pg) {
        if (!pg[0]) return;
        Mat d = Mat::Zero(r0, c0);
        for (size_t i = 0; i < idx.size(); ++i) {
            d.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
        }
        accumulate(pg[0], d);
    });
}

Var detach(const Var& a) { return leaf(a.value()); }

Var sum(const Var& a) {
    Mat out(1, 1);
    out(0, 0) = a.value().sum();
    const Eigen::Index r = a.rows(), c = a.cols();
    return make(std::move(out), {a.node()}, [r, c](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], Mat::Constant(r, c, g(0, 0)));
    });
}

Var sum_squares(const Var& a) {
    Mat out(1, 1);
    out(0, 0) = a.value().squaredNorm();
    NodePtr an = a.node();
    return make(std::move(out), {an}, [an](const Mat& g, std::span<Mat*> pg) {
        accumulate(pg[0], an->value * (2.0 * g(0, 0)));
    });
}

Var l2_norm(const Var& a) {
    Mat out(1, 1);
    const double n = a.value().norm();
    out(0, 0) = n;
    NodePtr an = a.node();
    return make(std::move(out), {an}, [an, n](const Mat& g, std::span<Mat*> pg) {
        if (n == 0.0) {
            accumulate(pg[0], Mat::Zero(an->value.rows(), an->value.cols()));
            return;
        }
        accumulate(pg[0], an->value * (g(0, 0) / n));
    });
}

Var row_sum_squares(const Var& a) {
    Mat out = a.value().rowwise().squaredNorm();
    NodePtr an = a.node();
    return make(std::move(out), {an}, [an](const Mat& g, std::span<Mat*> pg) {
        Mat d = an->value;
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            d.row(i) *= 2.0 * g(i, 0);
        }
        accumulate(pg[0], d);
    });
}

Var row_l2_norm(const Var& a) {
    Mat out = a.value().rowwise().norm();
    NodePtr an = a.node();
    Mat norms = out;
    return make(std::move(out), {an}, [an, norms](const Mat& g, std::span<Mat*> pg) {
        Mat d = Mat::Zero(an->value.rows(), an->value.cols());
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            if (norms(i, 0) > 0.0) {
                d.row(i) = an->value.row(i) * (g(i, 0) / norms(i, 0));
            }
        }
        accumulate(pg[0], d);
    });
}

Mat softmax(const Mat& logits) {
    Mat p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - m).exp().matrix();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
        throw std::invalid_argument("softmax_cross_entropy: one label per row required");
    }
    Mat p = softmax(logits.value());
    double loss = 0.0;
    std::vector<int> y(labels.begin(), labels.end());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        loss -= std::log(std::max(p(i, y[static_cast<size_t>(i)]), 1e-300));
    }
    const double n = static_cast<double>(p.rows());
    Mat out(1, 1);
    out(0, 0) = loss / n;
    return make(std::move(out), {logits.node()}, [p, y, n](const Mat& g, std::span<Mat*> pg) {
        Mat d = p;
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            d(i, y[static_cast<size_t>(i)]) -= 1.0;
        }
        accumulate(pg[0], d * (g(0, 0) / n));
    });
}

}  // namespace ldmt::ad
