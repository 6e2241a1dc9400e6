#include "ldmt/metrics.hpp"

#include "ldmt/error.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace ldmt {

ToyClassifier::ToyClassifier(Config cfg) : cfg_(cfg) {
    Rng rng = derive_rng(cfg.seed, 0xc1a55ULL);
    l1_ = Linear("cls.l1", cfg.input, cfg.hidden, rng);
    l2_ = Linear("cls.l2", cfg.hidden, cfg.feature, rng);
    head_ = Linear("cls.head", cfg.feature, cfg.classes, rng);
    provenance_ = "toy-classifier(seed=" + std::to_string(cfg.seed) + ",untrained)";
}

std::vector<Parameter> ToyClassifier::parameters() const {
    std::vector<Parameter> out;
    l1_.collect(out);
    l2_.collect(out);
    head_.collect(out);
    return out;
}

ad::Var ToyClassifier::feature_graph(const ad::Var& x) const {
    auto centered = ad::add_const(x, Mat::Constant(x.rows(), x.cols(), -0.5));
    return ad::silu(l2_(ad::silu(l1_(centered))));
}

std::vector<double> ToyClassifier::train(const Dataset& data) {
    if (data.empty()) {
        throw DataError("classifier training needs data");
    }
    std::vector<Image> imgs;
    std::vector<int> labels;
    for (const auto& li : data) {
        if (li.label < 0 || li.label >= cfg_.classes) {
            throw DataError("image '" + li.name + "' has no valid class label");
        }
        imgs.push_back(li.image);
        labels.push_back(li.label);
    }
    const Mat all = stack_rows(imgs);
    std::vector<ad::NodePtr> nodes;
    for (const auto& p : parameters()) nodes.push_back(p.node);
    Adam opt(nodes, cfg_.lr);
    Rng rng(cfg_.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, all.rows() - 1);
    std::vector<double> trace;
    for (int step = 0; step < cfg_.steps; ++step) {
        Mat batch(cfg_.batch, all.cols());
        std::vector<int> y(static_cast<size_t>(cfg_.batch));
        for (int i = 0; i < cfg_.batch; ++i) {
            const Eigen::Index k = pick(rng);
            batch.row(i) = all.row(k);
            y[static_cast<size_t>(i)] = labels[static_cast<size_t>(k)];
        }
        auto loss = ad::softmax_cross_entropy(head_(feature_graph(ad::leaf(batch))), y);
        opt.step(ad::backward(loss, nodes));
        trace.push_back(loss.scalar());
    }
    provenance_ = "toy-classifier(seed=" + std::to_string(cfg_.seed) + ",steps=" + std::to_string(cfg_.steps) +
                  ",n=" + std::to_string(data.size()) + ")";
    return trace;
}

Mat ToyClassifier::features(const Mat& images) const { return feature_graph(ad::leaf(images)).value(); }

Mat ToyClassifier::probabilities(const Mat& images) const {
    return ad::softmax(head_(feature_graph(ad::leaf(images))).value());
}

std::vector<int> ToyClassifier::predict(const Mat& images) const {
    const Mat p = probabilities(images);
    std::vector<int> out(static_cast<size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        Eigen::Index k;
        p.row(i).maxCoeff(&k);
        out[static_cast<size_t>(i)] = static_cast<int>(k);
    }
    return out;
}

double ToyClassifier::accuracy(const Dataset& data) const {
    if (data.empty()) return 0.0;
    std::vector<Image> imgs;
    for (const auto& li : data) imgs.push_back(li.image);
    const auto pred = predict(stack_rows(imgs));
    size_t hit = 0;
    for (size_t i = 0; i < data.size(); ++i) hit += pred[i] == data[i].label;
    return static_cast<double>(hit) / static_cast<double>(data.size());
}

namespace {

constexpr char kClsMagic[8] = {'L', 'D', 'M', 'T', 'C', 'L', 'S', 'F'};

}  // namespace

void ToyClassifier::save(const std::filesystem::path& path) const {
    nlohmann::json h;
    h["input"] = cfg_.input;
    h["hidden"] = cfg_.hidden;
    h["feature"] = cfg_.feature;
    h["classes"] = cfg_.classes;
    h["steps"] = cfg_.steps;
    h["batch"] = cfg_.batch;
    h["lr"] = cfg_.lr;
    h["seed"] = cfg_.seed;
    h["provenance"] = provenance_;
    const std::string text = h.dump();
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    const uint64_t len = text.size();
    out.write(kClsMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(len));
    for (const auto& p : parameters()) {
        out.write(reinterpret_cast<const char*>(p.node->value.data()),
                  static_cast<std::streamsize>(p.node->value.size() * sizeof(double)));
    }
    if (!out) throw DataError("short write to " + path.string());
}

ToyClassifier ToyClassifier::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open classifier " + path.string());
    char magic[8];
    uint64_t len = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || std::memcmp(magic, kClsMagic, 8) != 0) throw DataError("not a classifier file: " + path.string());
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    const auto h = nlohmann::json::parse(text);
    Config cfg;
    cfg.input = h.at("input");
    cfg.hidden = h.at("hidden");
    cfg.feature = h.at("feature");
    cfg.classes = h.at("classes");
    cfg.steps = h.at("steps");
    cfg.batch = h.at("batch");
    cfg.lr = h.at("lr");
    cfg.seed = h.at("seed");
    ToyClassifier c(cfg);
    for (const auto& p : c.parameters()) {
        in.read(reinterpret_cast<char*>(p.node->value.data()),
                static_cast<std::streamsize>(p.node->value.size() * sizeof(double)));
    }
    if (!in) throw DataError("truncated classifier file " + path.string());
    c.provenance_ = h.at("provenance");
    return c;
}

Mat sqrtm_psd(const Mat& a, int max_iter, double tol) {
    if (a.rows() != a.cols()) {
        throw DomainError("sqrtm of a non-square matrix");
    }
    const Eigen::Index n = a.rows();
    const double scale = a.norm();
    if (scale == 0.0) {
        return Mat::Zero(n, n);
    }
    using Dense = Eigen::MatrixXd;
    Dense y = Dense(a) / scale;
    Dense z = Dense::Identity(n, n);
    bool ok = false;
    for (int k = 0; k < max_iter; ++k) {
        const Dense yi = y.inverse();
        const Dense zi = z.inverse();
        Dense y_next = 0.5 * (y + zi);
        z = 0.5 * (z + yi);
        const double change = (y_next - y).norm();
        y = std::move(y_next);
        if (!y.allFinite()) break;
        if (change <= tol * y.norm()) {
            ok = true;
            break;
        }
    }
    if (!ok) {
        // Singular or badly conditioned input: fall back to the spectral form.
        Eigen::SelfAdjointEigenSolver<Dense> es(0.5 * (Dense(a) + Dense(a).transpose()));
        const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
    }
    Dense r = y * std::sqrt(scale);
    return 0.5 * (r + r.transpose());
}

Gaussian feature_statistics(const Mat& f) {
    if (f.rows() < 2) {
        throw EstimationError("feature statistics need at least two samples");
    }
    if (!f.allFinite()) {
        throw DataError("non-finite features");
    }
    Gaussian g;
    g.mean = f.colwise().mean().transpose();
    const Mat centered = f.rowwise() - g.mean.transpose();
    g.cov = (centered.transpose() * centered) / static_cast<double>(f.rows() - 1);
    const Eigen::Index d = f.cols();
    if (f.rows() < 4 * d) {
        const double lambda = 1e-3 * g.cov.trace() / static_cast<double>(d);
        g.cov.diagonal().array() += lambda;
    }
    return g;
}

double frechet_distance(const Gaussian& a, const Gaussian& b) {
    if (a.mean.size() != b.mean.size()) {
        throw DomainError("feature dimensions differ");
    }
    const Mat sa = sqrtm_psd(a.cov);
    Mat m = sa * b.cov * sa;
    m = 0.5 * (m + m.transpose()).eval();
    const double cross = sqrtm_psd(m).trace();
    const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    return std::max(0.0, d);
}

double fid_from_features(const Mat& a, const Mat& b) {
    if (a.rows() == 0 || b.rows() == 0) {
        throw EstimationError("FID of an empty set");
    }
    return frechet_distance(feature_statistics(a), feature_statistics(b));
}

double fid(const std::vector<Image>& a, const std::vector<Image>& b, const FeatureExtractor& extractor) {
    if (a.empty() || b.empty()) {
        throw EstimationError("FID of an empty set");
    }
    return fid_from_features(extractor.features(stack_rows(a)), extractor.features(stack_rows(b)));
}

double inception_score_from_probs(const Mat& probs) {
    if (probs.rows() == 0) {
        throw EstimationError("inception score of an empty set");
    }
    const Eigen::RowVectorXd marginal = probs.colwise().mean();
    double kl = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        for (Eigen::Index k = 0; k < probs.cols(); ++k) {
            const double p = probs(i, k);
            if (p > 0.0) {
                kl += p * (std::log(p) - std::log(marginal(k)));
            }
        }
    }
    return std::exp(std::max(0.0, kl / static_cast<double>(probs.rows())));
}

double inception_score_analogue(const std::vector<Image>& images, const ToyClassifier& classifier) {
    if (images.empty()) {
        throw EstimationError("inception score of an empty set");
    }
    return inception_score_from_probs(classifier.probabilities(stack_rows(images)));
}

std::vector<MetricReport> delta_report(const MetricRun& benign, const std::vector<MetricRun>& attacked) {
    std::vector<MetricReport> out;
    for (const auto& [name, v] : benign.metrics) {
        out.push_back({name, benign.name, v, std::nullopt, benign.samples, benign.generation});
    }
    for (const auto& run : attacked) {
        if (run.generation != benign.generation) {
            throw ComparabilityError("run '" + run.name + "' used a different generation config than '" +
                                     benign.name + "'");
        }
        for (const auto& [name, v] : run.metrics) {
            auto it = benign.metrics.find(name);
            if (it == benign.metrics.end()) {
                throw ComparabilityError("benign run lacks metric '" + name + "'");
            }
            out.push_back({name, run.name, v, v - it->second, run.samples, run.generation});
        }
    }
    return out;
}

void write_reports_csv(const std::vector<MetricReport>& reports, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw ResourceError("cannot write " + path.string());
    os.precision(17);
    os << "run,metric,value,increment,samples\n";
    for (const auto& r : reports) {
        os << r.run << ',' << r.metric << ',' << r.value << ',';
        if (r.increment) os << *r.increment;
        os << ',' << r.samples << '\n';
    }
}

nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json j = {{"metric", r.metric}, {"run", r.run}, {"value", r.value}, {"samples", r.samples},
                        {"config_echo", r.config_echo}};
    j["increment"] = r.increment ? nlohmann::json(*r.increment) : nlohmann::json();
    return j;
}

}  // namespace ldmt
