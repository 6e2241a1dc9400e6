#include "doctest.h"
#include "helpers.hpp"

#include "ldmt/error.hpp"
#include "ldmt/metrics.hpp"

#include <cmath>

using namespace ldmt;
using namespace ldmt::test;

namespace {

Mat random_spd(Eigen::Index d, Rng& rng) {
    const Mat a = randn(d, d, rng);
    return a * a.transpose() + 0.1 * Mat::Identity(d, d);
}

Mat eigen_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(a)};
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Mat fixed_features(int which) {
    Mat m(14, 3);
    for (int i = 0; i < 14; ++i) {
        for (int j = 0; j < 3; ++j) {
            m(i, j) = which == 0 ? ((i * 7 + j * 3) % 11) / 10.0 + 0.1 * j : ((i * 5 + j * 2) % 13) / 8.0 - 0.2 * j * j;
        }
    }
    return m;
}

}  // namespace

TEST_CASE("matrix square root") {
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
        const Mat a = random_spd(8, rng);
        const Mat s = sqrtm_psd(a);
        CHECK((s - eigen_sqrt(a)).cwiseAbs().maxCoeff() < 1e-8 * a.norm());
        CHECK((s * s - a).cwiseAbs().maxCoeff() < 1e-9 * a.norm());
    }
    // Singular PSD input.
    Eigen::VectorXd v(3);
    v << 1, 2, 2;
    const Mat p = v * v.transpose();
    CHECK((sqrtm_psd(p) - p / 3.0).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(sqrtm_psd(Mat::Zero(4, 4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frechet distance") {
    Rng rng(2);
    const Mat x = randn(200, 6, rng);
    CHECK(fid_from_features(x, x) < 1e-6);

    // Same covariance, shifted mean: exactly |m|^2.
    Eigen::RowVectorXd m(6);
    m << 1, -2, 0.5, 0, 3, 0.25;
    const Mat y = x.rowwise() + m;
    CHECK(fid_from_features(x, y) == doctest::Approx(m.squaredNorm()).epsilon(1e-8));

    const Mat z = randn(150, 6, rng) * 1.7;
    CHECK(fid_from_features(x, z) == doctest::Approx(fid_from_features(z, x)).epsilon(1e-8));

    // SciPy sqrtm reference on fixed features.
    CHECK(fid_from_features(fixed_features(0), fixed_features(1)) == doctest::Approx(0.8013404937717761).epsilon(1e-9));

    // Few samples: shrinkage keeps the result finite and non-negative.
    const double small = fid_from_features(randn(5, 6, rng), randn(5, 6, rng));
    CHECK(std::isfinite(small));
    CHECK(small >= 0.0);
    CHECK_THROWS_AS(fid_from_features(randn(1, 6, rng), x), EstimationError);
    CHECK_THROWS_AS(fid_from_features(randn(10, 5, rng), x), DomainError);
}

TEST_CASE("inception score") {
    CHECK(inception_score_from_probs(Mat::Constant(5, 4, 0.25)) == doctest::Approx(1.0));
    Mat two = Mat::Zero(2, 4);
    two(0, 0) = 1;
    two(1, 2) = 1;
    CHECK(inception_score_from_probs(two) == doctest::Approx(2.0));
    CHECK(inception_score_from_probs(Mat::Identity(4, 4)) == doctest::Approx(4.0));
    CHECK_THROWS_AS(inception_score_from_probs(Mat(0, 4)), EstimationError);
}

TEST_CASE("metric increments") {
    nlohmann::json gen = {{"steps", 50}, {"seed", 3}};
    MetricRun benign{"benign", {{"fid", 160.0}}, 100, gen};
    MetricRun a{"advdm", {{"fid", 170.0}}, 100, gen};
    MetricRun b{"mist", {{"fid", 190.0}}, 100, gen};
    const auto reps = delta_report(benign, {a, b});
    REQUIRE(reps.size() == 3);
    CHECK(!reps[0].increment);
    CHECK(*reps[1].increment == 10.0);
    CHECK(*reps[2].increment == 30.0);

    MetricRun c{"other", {{"fid", 150.0}}, 100, {{"steps", 100}, {"seed", 3}}};
    CHECK_THROWS_AS(delta_report(benign, {c}), ComparabilityError);
    MetricRun d{"extra", {{"is", 2.0}}, 100, gen};
    CHECK_THROWS_AS(delta_report(benign, {d}), ComparabilityError);
}

TEST_CASE("toy classifier") {
    ToyClassifier::Config cfg;
    cfg.steps = 300;
    cfg.seed = 4;
    ToyClassifier clf(cfg);
    const auto data = make_toy_dataset(160, 11);
    const auto trace = clf.train(data);
    REQUIRE(trace.size() == 300);
    const auto test = make_toy_dataset(80, 12);
    CHECK(clf.accuracy(test) > 0.5);

    std::vector<Image> imgs;
    for (const auto& d : test) imgs.push_back(d.image);
    const Mat p = clf.probabilities(stack_rows(imgs));
    CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    const Mat f = clf.features(stack_rows(imgs));
    CHECK(f.cols() == clf.feature_dim());
    const double is = inception_score_analogue(imgs, clf);
    CHECK(is >= 1.0);
    CHECK(is <= 4.0);

    const auto path = std::filesystem::temp_directory_path() / "ldmt_clf_test.bin";
    clf.save(path);
    const auto back = ToyClassifier::load(path);
    CHECK((back.features(stack_rows(imgs)) - f).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(path);

    // Same set through the extractor: zero distance.
    CHECK(fid(imgs, imgs, clf) < 1e-6);
}
