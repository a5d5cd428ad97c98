#pragma once
// Synthetic simulation campaigns shaped like the jet/HE runs: per-simulation
// domain lengths, subdomain file splits, jittered coordinates and a known
// sequence of temporal regimes.
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "snapcluster/kv_file.hpp"
#include "snapcluster/snapshot_store.hpp"

namespace snapcluster {

enum class SynthField { phases, constant };

struct CampaignSpec {
    int n_sims = 8;
    double he_min = 15.0, he_max = 25.0;
    double v_min = 1.5, v_max = 2.5;
    double radius_min = 0.5, radius_max = 1.0;
    double delta = 0.1;
    double y_extent = 20.7;      // y in [0, y_extent] for every simulation
    double x_pad = 10.0;         // domain x in [0, he_length + x_pad]
    int n_subdomains = 2;        // x-strips
    int regime_count = 3;
    std::uint64_t seed = 1;
    int step_constant = 23;      // steps = floor(he_length / tip_velocity) + step_constant
    int n_vars = 1;
    double noise = 0.01;         // amplitude of seeded uniform noise
    double jitter = 1e-5;        // coordinate jitter as a fraction of delta
    double front_amplitude = 0.1;
    double feature_span = 20.0;  // regime features sit in [-feature_span, 0] after alignment
    SynthField field = SynthField::phases;
    double constant_value = 1.0;
    std::string format = "csv";  // csv or bin
};

void validate_campaign_spec(const CampaignSpec& spec);
CampaignSpec campaign_spec_from_kv(const KeyValues& kv);
CampaignSpec load_campaign_spec(const std::filesystem::path& path);
KeyValues campaign_spec_to_kv(const CampaignSpec& spec);

struct SynthSimulation {
    std::string sim_key;
    SimulationMeta meta;
    double domain_length = 0.0;
    int n_steps = 0;
    std::uint64_t seed = 0;
};

struct ManifestRow {
    std::string sim_key;
    std::int64_t time_step = 0;
    int phase_label = 0;
};

struct CampaignManifest {
    std::vector<SynthSimulation> sims;
    std::vector<ManifestRow> rows;
};

// Parameters of every simulation, derived from the spec alone.
std::vector<SynthSimulation> plan_campaign(const CampaignSpec& spec);

int step_count(const CampaignSpec& spec, double he_length, double tip_velocity);
int phase_of_step(int step, int n_steps, int regime_count);

// Noise-free field at raw (unaligned) coordinates.
double synth_field(const CampaignSpec& spec, const SynthSimulation& sim, double x, double y, int step, int var);

// Writes <out>/<sim_key>/t<step>/sub<id>.<fmt>, <out>/campaign.csv and
// <out>/manifest.csv.
CampaignManifest generate_campaign(const CampaignSpec& spec, const std::filesystem::path& out_dir, int jobs = 1);

void write_manifest_csv(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest_csv(const std::filesystem::path& path);
void write_campaign_csv(const std::filesystem::path& path, const std::vector<SynthSimulation>& sims);

}  // namespace snapcluster
