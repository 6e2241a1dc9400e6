#include "doctest.h"
#include "helpers.hpp"

#include "ldmt/error.hpp"
#include "ldmt/finetune.hpp"

using namespace ldmt;
using namespace ldmt::test;

namespace {

std::vector<Mat> snapshot(const ToyLDM& m) {
    std::vector<Mat> out;
    for (const auto& p : m.parameters()) out.push_back(p.node->value);
    return out;
}

}  // namespace

TEST_CASE("textual inversion: zero steps, frozen weights, determinism") {
    auto m = tiny_model(5);
    const auto imgs = random_images(4, 6);
    const auto before = snapshot(m);

    TextualInversionConfig cfg;
    cfg.steps = 0;
    const auto e0 = textual_inversion(imgs, m, cfg);
    CHECK(e0.vector == m.embedding(Condition::null()));
    CHECK(e0.loss_trace.empty());

    cfg.steps = 40;
    cfg.seed = 2;
    const auto e1 = textual_inversion(imgs, m, cfg);
    const auto e2 = textual_inversion(imgs, m, cfg);
    CHECK(e1.vector == e2.vector);
    CHECK(e1.loss_trace.size() == 40);
    CHECK(e1.vector != e0.vector);

    const auto after = snapshot(m);
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);

    CHECK_THROWS_AS(textual_inversion({}, m, cfg), DataError);
}

TEST_CASE("generation from a token and persistence") {
    auto m = tiny_model(5);
    TextualInversionConfig cfg;
    cfg.steps = 10;
    const auto e = textual_inversion(random_images(2, 1), m, cfg);
    CHECK(generate_from_token(m, e, 0, 1).empty());
    const auto a = generate_from_token(m, e, 2, 7, 5);
    const auto b = generate_from_token(m, e, 2, 7, 5);
    REQUIRE(a.size() == 2);
    CHECK(a[0].pixels == b[0].pixels);
    CHECK(a[0].height == 32);

    const auto path = std::filesystem::temp_directory_path() / "ldmt_token_test.json";
    save_embedding(e, path);
    const auto back = load_embedding(path);
    CHECK(back.vector == e.vector);
    CHECK(back.group_id == e.group_id);
    CHECK(back.loss_trace == e.loss_trace);
    std::filesystem::remove(path);
}
