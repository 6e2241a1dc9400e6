#pragma once

#include "ldmt/attacks.hpp"
#include "ldmt/defenses.hpp"
#include "ldmt/metrics.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ldmt {

// One grid cell: attack a dataset subset, optionally purify it, run the target
// pipeline and score the generations. Serialized as "key = value" lines in a
// fixed key order, so serialize(parse(serialize(c))) == serialize(c).
struct ExperimentConfig {
    std::string checkpoint;
    std::string dataset;
    std::string classifier;
    std::string out_dir = "runs";
    int images = 64;  // first N dataset images

    std::string attack = "none";  // none | advdm | encoder | chain | mist | sds
    AttackBudget budget;
    TimeStepRange range;
    double fuse_weight = 1.0;
    int chain_depth = 5;
    int mc_samples = 1;
    std::string target_image;  // empty: built-in periodic pattern

    std::string pipeline = "variation";  // variation | inpainting
    double strength = 0.7;
    int steps = 100;
    double guidance = 7.5;
    std::string condition = "null";  // null | class:<k>

    std::string metrics = "fid,is";
    std::string defense = "none";  // none | jpeg | tvm
    int jpeg_quality = 75;
    double tvm_weight = 0.1;
    int tvm_iterations = 50;

    uint64_t seed = 0;  // attack and generation noise

    void validate() const;
    std::string serialize() const;
    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // Content address of the serialized config (out_dir excluded).
    std::string id() const;
    Condition generation_condition() const;
    std::optional<DefenseConfig> defense_config() const;
    GenerationConfig generation() const;
    std::vector<std::string> metric_names() const;
    // Label of the attack part, e.g. "advdm(800,900]" or "benign".
    std::string attack_label() const;
    // Everything that must match for runs to be compared.
    nlohmann::json comparability_key() const;
};

// Replaces the seed with $LDMT_SEED when set. Returns true if applied.
bool apply_seed_override(ExperimentConfig& cfg);

std::string sha256_hex(const std::string& bytes);

struct RunRecord {
    std::string id;
    std::string config_text;
    std::map<std::string, std::string> artifacts;  // name -> path
    std::map<std::string, double> metrics;
    std::map<std::string, std::string> checkpoint_hashes;
    double wall_clock_s = 0.0;

    nlohmann::json to_json() const;
    static RunRecord from_json(const nlohmann::json& j);
    ExperimentConfig config() const { return ExperimentConfig::parse(config_text); }
};

// Throws DataError naming the first missing artifact.
void check_artifacts(const RunRecord& r);
void write_record(const RunRecord& r, const std::filesystem::path& path);
RunRecord read_record(const std::filesystem::path& path);

// Model, classifier and dataset shared by the cells of a grid.
class Workspace {
public:
    static Workspace open(const ExperimentConfig& cfg);
    Workspace(ToyLDM model, std::optional<ToyClassifier> classifier, Dataset data,
              std::map<std::string, std::string> hashes);

    const ToyLDM& model() const { return model_; }
    const ToyClassifier& classifier() const;
    const Dataset& data() const { return data_; }
    const std::map<std::string, std::string>& hashes() const { return hashes_; }
    std::vector<Image> images(int count) const;

private:
    ToyLDM model_;
    std::optional<ToyClassifier> classifier_;
    Dataset data_;
    std::map<std::string, std::string> hashes_;
};

struct CellOptions {
    bool reuse_cache = true;
    bool save_images = true;
};

// Runs (or loads from <out_dir>/<id>/record.json) one cell.
RunRecord run_cell(const ExperimentConfig& cfg, const Workspace& ws, const CellOptions& opt = {});

// Runs cells on a bounded worker pool; results keep input order. Each
// finished record is appended to <out_dir>/index.jsonl by a single writer.
std::vector<RunRecord> run_cells(const std::vector<ExperimentConfig>& cells, const Workspace& ws, int workers,
                                 const CellOptions& opt = {});

// ---------------------------------------------------------------------------
// Experiment grids.

std::vector<TimeStepRange> fold_ranges(int horizon, int folds);
// Width-one ranges (c-1, c]; duplicates dropped with a warning.
std::vector<TimeStepRange> narrowband_ranges(const std::vector<int>& centers, int horizon,
                                             std::vector<std::string>* warnings = nullptr);
// Ascending, deduplicated iteration budgets.
std::vector<int> ablation_grid(std::vector<int> steps);

struct GridRow {
    std::string label;
    RunRecord record;
    std::map<std::string, double> delta;  // metric increments over benign
};

struct GridResult {
    RunRecord benign;
    std::vector<GridRow> rows;
    std::vector<std::string> warnings;
};

GridResult sweep_ranges(const ExperimentConfig& base, int folds, const Workspace& ws, int workers = 1,
                        bool with_unrestricted = true, const CellOptions& opt = {});
GridResult narrowband(const ExperimentConfig& base, const std::vector<int>& centers, const Workspace& ws,
                      int workers = 1, const CellOptions& opt = {});
GridResult iteration_ablation(const ExperimentConfig& base, const std::vector<int>& steps, const Workspace& ws,
                              int workers = 1, const CellOptions& opt = {});

// <stem>.csv, <stem>.json and, when `plot_metric` is non-empty, a bar chart
// of its increments at <stem>.png.
void write_grid(const GridResult& g, const std::filesystem::path& stem, const std::string& plot_metric = "fid");

// Consolidates every record under `runs_dir`: one table row per run with its
// increments over the benign run of the same comparability group. Throws
// ComparabilityError when a group has attacked runs but no benign run, and
// DataError naming any missing artifact.
std::vector<MetricReport> full_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_dir);

}  // namespace ldmt
