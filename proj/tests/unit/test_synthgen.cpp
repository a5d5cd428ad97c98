#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "snapcluster/error.hpp"
#include "snapcluster/ingest.hpp"
#include "snapcluster/preprocess.hpp"
#include "snapcluster/synthgen.hpp"
#include "test_util.hpp"

using namespace snapcluster;
namespace fs = std::filesystem;

namespace {

CampaignSpec small_spec() {
    CampaignSpec s;
    s.n_sims = 2;
    s.he_min = 4.0;
    s.he_max = 6.0;
    s.v_min = 1.0;
    s.v_max = 2.0;
    s.delta = 0.25;
    s.y_extent = 3.0;
    s.x_pad = 2.0;
    s.n_subdomains = 3;
    s.regime_count = 2;
    s.step_constant = 2;
    s.feature_span = 4.0;
    s.seed = 11;
    return s;
}

// ingest, align and remap one simulation onto `grid`.
RemapInfo run_to_remap(const fs::path& root, const std::string& key, const CommonGrid& grid) {
    ingest_simulation(root / "raw", key, root / "cons", 1);
    preprocess_simulation(root / "cons" / key, root / "aligned" / key, {-8.0, 0.0}, 1);
    return remap_simulation(root / "aligned" / key, key, grid, root / "remap" / key, 0.0, 1);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("step counts and phases follow the spec rule") {
    CampaignSpec s = small_spec();
    CHECK(step_count(s, 5.0, 2.0) == 4);
    s.step_constant = 23;
    CHECK(step_count(s, 20.0, 1.5) == 36);
    CHECK(phase_of_step(0, 10, 3) == 0);
    CHECK(phase_of_step(4, 10, 3) == 1);
    CHECK(phase_of_step(9, 10, 3) == 2);
    for (const auto& sim : plan_campaign(small_spec())) {
        CHECK(sim.n_steps == step_count(small_spec(), sim.meta.he_length, sim.meta.tip_velocity));
        CHECK(sim.domain_length == doctest::Approx(sim.meta.he_length + 2.0));
    }
}

TEST_CASE("campaign specs are validated and round trip through key=value") {
    CampaignSpec s = small_spec();
    CHECK(campaign_spec_from_kv(campaign_spec_to_kv(s)).he_max == s.he_max);
    KeyValues kv = campaign_spec_to_kv(s);
    kv["colour"] = "red";
    CHECK_THROWS_AS(campaign_spec_from_kv(kv), ValidationError);
    s.regime_count = 1;
    CHECK_THROWS_AS(validate_campaign_spec(s), ValidationError);
    s = small_spec();
    s.he_min = s.he_max;
    CHECK_THROWS_AS(validate_campaign_spec(s), ValidationError);
    s = small_spec();
    s.jitter = 1e-3;
    CHECK_THROWS_AS(validate_campaign_spec(s), ValidationError);
}

TEST_CASE("constant field survives ingest and remap everywhere") {
    testutil::TempDir tmp;
    CampaignSpec s = small_spec();
    s.n_sims = 1;
    s.n_subdomains = 1;
    s.field = SynthField::constant;
    s.constant_value = 2.5;
    s.noise = 0.0;
    auto m = generate_campaign(s, tmp / "raw", 1);
    CommonGrid g = build_common_grid(-5.0, 0.0, 0.0, 3.0, 0.25, 4);
    auto info = run_to_remap(tmp.path(), m.sims[0].sim_key, g);
    for (const auto& b : g.blocks) {
        auto rb = read_remapped_block(remapped_block_path(tmp / "remap" / m.sims[0].sim_key, b.block_id));
        for (std::uint64_t r = 0; r < b.row_count; ++r) {
            for (std::uint32_t t = 0; t < info.n_steps; ++t) CHECK(rb.value(r, 0, t) == 2.5);
        }
    }
}

TEST_CASE("remapped values match the analytic field") {
    testutil::TempDir tmp;
    CampaignSpec s = small_spec();
    s.noise = 0.0;
    s.jitter = 1e-4;
    auto m = generate_campaign(s, tmp / "raw", 2);
    CommonGrid g = build_common_grid(-5.0, 0.0, 0.0, 3.0, 0.25, 5);
    for (const auto& sim : m.sims) {
        auto info = run_to_remap(tmp.path(), sim.sim_key, g);
        CHECK(info.n_steps == static_cast<std::uint32_t>(sim.n_steps));
        double worst = 0;
        for (const auto& b : g.blocks) {
            auto rb = read_remapped_block(remapped_block_path(tmp / "remap" / sim.sim_key, b.block_id));
            for (std::uint64_t r = 0; r < b.row_count; ++r) {
                const double xa = rb.data[r * rb.width()], y = rb.data[r * rb.width() + 1];
                for (std::uint32_t t = 0; t < info.n_steps; ++t) {
                    const double want = synth_field(s, sim, xa + sim.domain_length, y, static_cast<int>(t), 0);
                    worst = std::max(worst, std::abs(rb.value(r, 0, t) - want));
                }
            }
        }
        // Jitter of 1e-4 spacing against a front of width 2 spacings.
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("each phase puts its feature at a different place") {
    CampaignSpec s = small_spec();
    s.regime_count = 3;
    s.front_amplitude = 0.0;
    const auto sim = plan_campaign(s)[0];
    std::set<double> peaks;
    for (int step = 0; step < sim.n_steps; ++step) {
        double best = -1, best_x = 0;
        for (double xa = -4.0; xa <= 0.0; xa += 0.25) {
            const double v = synth_field(s, sim, xa + sim.domain_length, 1.5, step, 0);
            if (v > best) {
                best = v;
                best_x = xa;
            }
        }
        CHECK(best_x == doctest::Approx(-s.feature_span * (phase_of_step(step, sim.n_steps, 3) + 1) / 4.0));
        peaks.insert(best_x);
    }
    CHECK(peaks.size() == 3);
}

TEST_CASE("generation is deterministic and independent of job count") {
    testutil::TempDir tmp;
    CampaignSpec s = small_spec();
    s.format = "bin";
    auto a = generate_campaign(s, tmp / "a", 1);
    auto b = generate_campaign(s, tmp / "b", 2);
    REQUIRE(a.rows.size() == b.rows.size());
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(tmp / "a")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), tmp / "a");
        CHECK(slurp(e.path()) == slurp(tmp / "b" / rel));
        ++files;
    }
    CHECK(files > 3);
    auto rows = read_manifest_csv(tmp / "a" / "manifest.csv");
    CHECK(rows.size() == a.rows.size());
    CHECK(rows.back().phase_label == 1);
}

TEST_CASE("domain lengths vary while the y extent is shared") {
    CampaignSpec s = small_spec();
    s.n_sims = 6;
    auto sims = plan_campaign(s);
    std::set<double> lengths;
    for (const auto& sim : sims) {
        lengths.insert(sim.domain_length);
        CHECK(sim.meta.he_length >= s.he_min);
        CHECK(sim.meta.he_length < s.he_max);
    }
    CHECK(lengths.size() == sims.size());
}
