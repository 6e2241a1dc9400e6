#include "ldmt/experiment.hpp"

#include "ldmt/error.hpp"
#include "ldmt/plot.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace ldmt {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& key, const std::string& v) {
    size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    size_t pos = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size()) throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Ordered key table: (key, getter, setter).
struct Field {
    const char* key;
    std::string (*get)(const ExperimentConfig&);
    void (*set)(ExperimentConfig&, const std::string&);
};

#define LDMT_STR(K, M) \
    Field { K, [](const ExperimentConfig& c) { return c.M; }, [](ExperimentConfig& c, const std::string& v) { c.M = v; } }
#define LDMT_INT(K, M)                                                             \
    Field {                                                                        \
        K, [](const ExperimentConfig& c) { return std::to_string(c.M); },          \
            [](ExperimentConfig& c, const std::string& v) { c.M = static_cast<decltype(c.M)>(to_int(K, v)); } \
    }
#define LDMT_DBL(K, M) \
    Field { K, [](const ExperimentConfig& c) { return num(c.M); }, [](ExperimentConfig& c, const std::string& v) { c.M = to_double(K, v); } }

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        LDMT_STR("checkpoint", checkpoint),
        LDMT_STR("dataset", dataset),
        LDMT_STR("classifier", classifier),
        LDMT_STR("out_dir", out_dir),
        LDMT_INT("images", images),
        LDMT_STR("attack", attack),
        LDMT_DBL("attack.epsilon", budget.epsilon),
        LDMT_DBL("attack.step_size", budget.step_size),
        LDMT_INT("attack.iterations", budget.iterations),
        LDMT_INT("attack.range_a", range.a),
        LDMT_INT("attack.range_b", range.b),
        LDMT_DBL("attack.fuse_weight", fuse_weight),
        LDMT_INT("attack.chain_depth", chain_depth),
        LDMT_INT("attack.mc_samples", mc_samples),
        LDMT_STR("attack.target_image", target_image),
        LDMT_STR("generation.pipeline", pipeline),
        LDMT_DBL("generation.strength", strength),
        LDMT_INT("generation.steps", steps),
        LDMT_DBL("generation.guidance", guidance),
        LDMT_STR("generation.condition", condition),
        LDMT_STR("metrics", metrics),
        LDMT_STR("defense", defense),
        LDMT_INT("defense.jpeg_quality", jpeg_quality),
        LDMT_DBL("defense.tvm_weight", tvm_weight),
        LDMT_INT("defense.tvm_iterations", tvm_iterations),
        Field{"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
              [](ExperimentConfig& c, const std::string& v) {
                  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
                      throw ConfigError("key 'seed': not an unsigned integer: '" + v + "'");
                  }
                  c.seed = std::stoull(v);
              }},
    };
    return f;
}

#undef LDMT_STR
#undef LDMT_INT
#undef LDMT_DBL

const std::set<std::string> kAttacks = {"none", "advdm", "encoder", "chain", "mist", "sds"};

std::string zero_pad(size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (images < 1) throw ConfigError("images must be positive");
    if (!kAttacks.count(attack)) throw ConfigError("unknown attack '" + attack + "'");
    if (attack != "none") budget.validate();
    if (pipeline != "variation" && pipeline != "inpainting") throw ConfigError("unknown pipeline '" + pipeline + "'");
    if (!(strength > 0.0 && strength <= 1.0)) throw ConfigError("strength must lie in (0,1]");
    if (steps < 1) throw ConfigError("generation steps must be positive");
    if (mc_samples < 1) throw ConfigError("mc_samples must be positive");
    generation_condition();
    defense_config();
    metric_names();
}

std::string ExperimentConfig::serialize() const {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += " = ";
        out += f.get(*this);
        out += '\n';
    }
    return out;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig c;
    std::istringstream in(text);
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq)), value = trim(t.substr(eq + 1));
        const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return key == f.key; });
        if (it == fields().end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
        it->set(c, value);
    }
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void ExperimentConfig::save(const fs::path& path) const {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ResourceError("cannot write " + path.string());
    os << serialize();
}

// The store location is not part of the content address.
std::string ExperimentConfig::id() const {
    ExperimentConfig c = *this;
    c.out_dir.clear();
    return sha256_hex(c.serialize()).substr(0, 16);
}

Condition ExperimentConfig::generation_condition() const {
    if (condition == "null") return Condition::null();
    if (condition.rfind("class:", 0) == 0) {
        const auto k = to_int("generation.condition", condition.substr(6));
        if (k < 0) throw ConfigError("negative class id");
        return Condition::class_token(static_cast<int>(k));
    }
    throw ConfigError("condition must be 'null' or 'class:<k>', got '" + condition + "'");
}

std::optional<DefenseConfig> ExperimentConfig::defense_config() const {
    if (defense == "none") return std::nullopt;
    DefenseConfig d;
    if (defense == "jpeg") {
        d.kind = DefenseConfig::Kind::Jpeg;
    } else if (defense == "tvm") {
        d.kind = DefenseConfig::Kind::Tvm;
    } else {
        throw ConfigError("unknown defense '" + defense + "'");
    }
    d.jpeg_quality = jpeg_quality;
    d.tvm_weight = tvm_weight;
    d.tvm_iterations = tvm_iterations;
    d.validate();
    return d;
}

GenerationConfig ExperimentConfig::generation() const { return {strength, steps, guidance, seed}; }

std::vector<std::string> ExperimentConfig::metric_names() const {
    std::vector<std::string> out;
    std::stringstream ss(metrics);
    std::string m;
    while (std::getline(ss, m, ',')) {
        m = trim(m);
        if (m.empty()) continue;
        if (m != "fid" && m != "is") throw ConfigError("unknown metric '" + m + "'");
        out.push_back(m);
    }
    return out;
}

std::string ExperimentConfig::attack_label() const {
    if (attack == "none") return "benign";
    std::string s = attack;
    if (attack == "advdm" || attack == "sds" || attack == "mist") s += range.label();
    if (attack == "chain") s += "-d" + std::to_string(chain_depth);
    if (budget.iterations != AttackBudget{}.iterations) s += "-i" + std::to_string(budget.iterations);
    return s;
}

nlohmann::json ExperimentConfig::comparability_key() const {
    return {{"checkpoint", checkpoint}, {"dataset", dataset},   {"classifier", classifier}, {"images", images},
            {"pipeline", pipeline},     {"strength", strength}, {"steps", steps},           {"guidance", guidance},
            {"condition", condition},   {"seed", seed},         {"metrics", metrics},       {"defense", defense},
            {"jpeg_quality", jpeg_quality}, {"tvm_weight", tvm_weight}, {"tvm_iterations", tvm_iterations}};
}

bool apply_seed_override(ExperimentConfig& cfg) {
    const char* env = std::getenv("LDMT_SEED");
    if (!env || !*env) return false;
    ExperimentConfig probe;
    fields().back().set(probe, env);
    cfg.seed = probe.seed;
    return true;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &n, EVP_sha256(), nullptr);
    std::ostringstream hex;
    for (unsigned int i = 0; i < n; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

// ---------------------------------------------------------------------------

nlohmann::json RunRecord::to_json() const {
    return {{"id", id},
            {"config", config_text},
            {"artifacts", artifacts},
            {"metrics", metrics},
            {"checkpoint_hashes", checkpoint_hashes},
            {"wall_clock_s", wall_clock_s}};
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
    RunRecord r;
    r.id = j.at("id").get<std::string>();
    r.config_text = j.at("config").get<std::string>();
    r.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.checkpoint_hashes = j.at("checkpoint_hashes").get<std::map<std::string, std::string>>();
    r.wall_clock_s = j.value("wall_clock_s", 0.0);
    return r;
}

void check_artifacts(const RunRecord& r) {
    for (const auto& [name, path] : r.artifacts) {
        if (!fs::exists(path)) throw DataError("run " + r.id + ": missing artifact '" + name + "' at " + path);
    }
}

void write_record(const RunRecord& r, const fs::path& path) {
    check_artifacts(r);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw ResourceError("cannot write " + tmp.string());
        os << std::setprecision(17) << r.to_json().dump(2) << '\n';
    }
    fs::rename(tmp, path);
}

RunRecord read_record(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read record " + path.string());
    return RunRecord::from_json(nlohmann::json::parse(in));
}

// ---------------------------------------------------------------------------

Workspace::Workspace(ToyLDM model, std::optional<ToyClassifier> classifier, Dataset data,
                     std::map<std::string, std::string> hashes)
    : model_(std::move(model)), classifier_(std::move(classifier)), data_(std::move(data)), hashes_(std::move(hashes)) {}

Workspace Workspace::open(const ExperimentConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("no checkpoint given");
    if (cfg.dataset.empty()) throw ConfigError("no dataset given");
    std::map<std::string, std::string> hashes;
    hashes["model"] = file_sha256(cfg.checkpoint);
    ToyLDM model = load_checkpoint(cfg.checkpoint);
    std::optional<ToyClassifier> clf;
    if (!cfg.classifier.empty()) {
        hashes["classifier"] = file_sha256(cfg.classifier);
        clf = ToyClassifier::load(cfg.classifier);
    }
    return Workspace(std::move(model), std::move(clf), load_image_dir(cfg.dataset), std::move(hashes));
}

const ToyClassifier& Workspace::classifier() const {
    if (!classifier_) throw StateError("no classifier loaded; metrics need one");
    return *classifier_;
}

std::vector<Image> Workspace::images(int count) const {
    if (count > static_cast<int>(data_.size())) {
        throw DataError("requested " + std::to_string(count) + " images but the dataset has " +
                        std::to_string(data_.size()));
    }
    std::vector<Image> out;
    for (int i = 0; i < count; ++i) out.push_back(data_[static_cast<size_t>(i)].image);
    return out;
}

namespace {

std::vector<AdversarialExample> attack_chunk(const ExperimentConfig& cfg, const Workspace& ws,
                                             const std::vector<Image>& images, uint64_t seed) {
    const ToyLDM& m = ws.model();
    AttackOptions opts;
    opts.mc_samples = cfg.mc_samples;
    opts.surrogate_id = ws.hashes().at("model");
    TargetSpec target{cfg.target_image.empty() ? periodic_target(images.front().height)
                                               : resize_center_crop(read_png(cfg.target_image), images.front().height),
                      Condition::null()};
    const AttackMethod method = attack_method_from_string(cfg.attack);
    switch (method) {
        case AttackMethod::AdvDM: return advdm_attack(images, m, cfg.range, cfg.budget, seed, opts);
        case AttackMethod::SDS: return sds_attack(images, m, cfg.range, cfg.budget, seed, opts);
        case AttackMethod::Encoder: return encoder_attack(images, m, target, cfg.budget, seed, opts);
        case AttackMethod::Mist:
            return mist_attack(images, m, target, {cfg.fuse_weight, cfg.range}, cfg.budget, seed, opts);
        case AttackMethod::Chain: {
            ChainConfig cc;
            cc.depth = cfg.chain_depth;
            cc.strength = cfg.strength;
            cc.steps = cfg.steps;
            cc.guidance = cfg.guidance;
            return chain_attack(images, m, target, cc, cfg.budget, seed, opts);
        }
    }
    throw ConfigError("unknown attack");
}

// Attacks run in fixed chunks so a cell's autograd graph stays bounded
// (~200 MB) whatever the image count. Chunk k > 0 uses a seed derived from
// (seed, k); results depend on the chunk size, which is fixed.
constexpr size_t kAttackChunk = 50;

std::vector<AdversarialExample> attack_images(const ExperimentConfig& cfg, const Workspace& ws,
                                              const std::vector<Image>& images) {
    std::vector<AdversarialExample> out;
    for (size_t b = 0, k = 0; b < images.size(); b += kAttackChunk, ++k) {
        const std::vector<Image> chunk(images.begin() + static_cast<std::ptrdiff_t>(b),
                                       images.begin() + static_cast<std::ptrdiff_t>(std::min(b + kAttackChunk, images.size())));
        const uint64_t seed = k == 0 ? cfg.seed : derive_rng(cfg.seed, k)();
        auto part = attack_chunk(cfg, ws, chunk, seed);
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

void save_images(const std::vector<Image>& images, const fs::path& dir) {
    fs::create_directories(dir);
    for (size_t i = 0; i < images.size(); ++i) write_png(dir / (zero_pad(i) + ".png"), images[i]);
}

}  // namespace

RunRecord run_cell(const ExperimentConfig& cfg, const Workspace& ws, const CellOptions& opt) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir = fs::path(cfg.out_dir) / cfg.id();
    const fs::path record_path = dir / "record.json";
    if (opt.reuse_cache && fs::exists(record_path)) {
        RunRecord cached = read_record(record_path);
        if (cached.id == cfg.id() && cached.checkpoint_hashes == ws.hashes()) {
            check_artifacts(cached);
            return cached;
        }
    }
    fs::create_directories(dir);

    RunRecord rec;
    rec.id = cfg.id();
    rec.config_text = cfg.serialize();
    rec.checkpoint_hashes = ws.hashes();
    cfg.save(dir / "config.txt");
    rec.artifacts["config"] = (dir / "config.txt").string();

    const std::vector<Image> clean = ws.images(cfg.images);
    std::vector<Image> inputs = clean;
    if (cfg.attack != "none") {
        const auto aes = attack_images(cfg, ws, clean);
        nlohmann::json side = {{"method", cfg.attack},
                               {"epsilon", cfg.budget.epsilon},
                               {"step_size", cfg.budget.step_size},
                               {"iterations", cfg.budget.iterations},
                               {"seed", cfg.seed},
                               {"surrogate_checkpoint_sha256", ws.hashes().at("model")},
                               {"final_loss", nlohmann::json::array()}};
        if (aes.front().range) side["range"] = {aes.front().range->a, aes.front().range->b};
        for (size_t i = 0; i < aes.size(); ++i) {
            inputs[i] = aes[i].adversarial();
            side["final_loss"].push_back(aes[i].loss_trace.empty() ? 0.0 : aes[i].loss_trace.back());
        }
        if (opt.save_images) {
            save_images(inputs, dir / "adv");
            rec.artifacts["adversarial"] = (dir / "adv").string();
        }
        std::ofstream(dir / "adv.json") << std::setprecision(17) << side.dump(2) << '\n';
        rec.artifacts["adversarial_sidecar"] = (dir / "adv.json").string();
    }
    if (const auto d = cfg.defense_config()) {
        for (auto& im : inputs) im = apply_defense(im, *d);
    }

    const Condition cond = cfg.generation_condition();
    std::vector<Image> generated;
    if (cfg.pipeline == "variation") {
        generated = run_variation_batch(inputs, cond, cfg.generation(), ws.model());
    } else {
        const auto mask = half_mask(inputs.front().height, inputs.front().width);
        generated = run_inpainting_batch(inputs, cond.with_mask(mask), cfg.generation(), ws.model());
    }
    if (opt.save_images) {
        save_images(generated, dir / "gen");
        rec.artifacts["generated"] = (dir / "gen").string();
    }

    for (const auto& m : cfg.metric_names()) {
        if (m == "fid") rec.metrics["fid"] = fid(generated, clean, ws.classifier());
        if (m == "is") rec.metrics["is"] = inception_score_analogue(generated, ws.classifier());
    }
    rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_record(rec, record_path);
    rec.artifacts["record"] = record_path.string();
    return rec;
}

std::vector<RunRecord> run_cells(const std::vector<ExperimentConfig>& cells, const Workspace& ws, int workers,
                                 const CellOptions& opt) {
    if (workers < 1) throw ConfigError("workers must be positive");
    std::vector<RunRecord> out(cells.size());
    std::vector<std::exception_ptr> errors(cells.size());
    std::atomic<size_t> next{0};
    std::mutex index_mutex;
    auto work = [&] {
        for (size_t i = next++; i < cells.size(); i = next++) {
            try {
                out[i] = run_cell(cells[i], ws, opt);
                std::lock_guard lock(index_mutex);
                fs::create_directories(cells[i].out_dir);
                std::ofstream(fs::path(cells[i].out_dir) / "index.jsonl", std::ios::app)
                    << nlohmann::json{{"id", out[i].id}, {"label", cells[i].attack_label()}, {"metrics", out[i].metrics}}
                           .dump()
                    << '\n';
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int n = std::min<int>(workers, static_cast<int>(std::max<size_t>(cells.size(), 1)));
    std::vector<std::thread> pool;
    for (int k = 1; k < n; ++k) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

// ---------------------------------------------------------------------------

std::vector<TimeStepRange> fold_ranges(int horizon, int folds) {
    if (folds < 1 || horizon % folds != 0) {
        throw ConfigError("folds (" + std::to_string(folds) + ") must divide the horizon (" + std::to_string(horizon) +
                          ")");
    }
    std::vector<TimeStepRange> out;
    const int w = horizon / folds;
    for (int i = 0; i < folds; ++i) out.push_back({i * w, (i + 1) * w});
    return out;
}

std::vector<TimeStepRange> narrowband_ranges(const std::vector<int>& centers, int horizon,
                                             std::vector<std::string>* warnings) {
    std::vector<TimeStepRange> out;
    std::set<int> seen;
    for (int c : centers) {
        if (c < 1 || c > horizon) {
            throw ConfigError("narrow-band center " + std::to_string(c) + " outside [1, " + std::to_string(horizon) + "]");
        }
        if (!seen.insert(c).second) {
            if (warnings) warnings->push_back("duplicate center " + std::to_string(c) + " dropped");
            continue;
        }
        out.push_back({c - 1, c});
    }
    return out;
}

std::vector<int> ablation_grid(std::vector<int> steps) {
    for (int s : steps)
        if (s < 0) throw ConfigError("iteration budgets must be nonnegative");
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    return steps;
}

namespace {

ExperimentConfig benign_of(const ExperimentConfig& base) {
    ExperimentConfig b = base;
    b.attack = "none";
    b.budget = AttackBudget{};
    b.range = TimeStepRange{};
    b.fuse_weight = 1.0;
    b.chain_depth = 5;
    b.mc_samples = 1;
    b.target_image.clear();
    return b;
}

GridResult run_grid(const ExperimentConfig& base, std::vector<std::pair<std::string, ExperimentConfig>> cells,
                    const Workspace& ws, int workers, const CellOptions& opt) {
    std::vector<ExperimentConfig> all{benign_of(base)};
    for (auto& c : cells) all.push_back(c.second);
    const auto recs = run_cells(all, ws, workers, opt);
    GridResult g;
    g.benign = recs[0];
    for (size_t i = 0; i < cells.size(); ++i) {
        GridRow row{cells[i].first, recs[i + 1], {}};
        for (const auto& [k, v] : row.record.metrics) row.delta[k] = v - g.benign.metrics.at(k);
        g.rows.push_back(std::move(row));
    }
    return g;
}

}  // namespace

GridResult sweep_ranges(const ExperimentConfig& base, int folds, const Workspace& ws, int workers,
                        bool with_unrestricted, const CellOptions& opt) {
    const auto ranges = fold_ranges(ws.model().horizon(), folds);
    std::vector<std::pair<std::string, ExperimentConfig>> cells;
    ExperimentConfig c = base;
    c.attack = "advdm";
    if (with_unrestricted && folds > 1) {
        c.range = TimeStepRange::full(ws.model().horizon());
        cells.emplace_back("unrestricted", c);
    }
    for (const auto& r : ranges) {
        c.range = r;
        cells.emplace_back(r.label(), c);
    }
    return run_grid(base, std::move(cells), ws, workers, opt);
}

GridResult narrowband(const ExperimentConfig& base, const std::vector<int>& centers, const Workspace& ws, int workers,
                      const CellOptions& opt) {
    std::vector<std::string> warnings;
    const auto ranges = narrowband_ranges(centers, ws.model().horizon(), &warnings);
    std::vector<std::pair<std::string, ExperimentConfig>> cells;
    ExperimentConfig c = base;
    c.attack = "advdm";
    for (const auto& r : ranges) {
        c.range = r;
        cells.emplace_back(r.label(), c);
    }
    GridResult g;
    if (!cells.empty()) g = run_grid(base, std::move(cells), ws, workers, opt);
    g.warnings = warnings;
    return g;
}

GridResult iteration_ablation(const ExperimentConfig& base, const std::vector<int>& steps, const Workspace& ws,
                              int workers, const CellOptions& opt) {
    std::vector<std::pair<std::string, ExperimentConfig>> cells;
    ExperimentConfig c = base;
    if (c.attack == "none") c.attack = "advdm";
    for (int s : ablation_grid(steps)) {
        c.budget.iterations = s;
        cells.emplace_back(std::to_string(s), c);
    }
    if (cells.empty()) return {};
    return run_grid(base, std::move(cells), ws, workers, opt);
}

void write_grid(const GridResult& g, const fs::path& stem, const std::string& plot_metric) {
    if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
    std::set<std::string> names;
    for (const auto& [k, v] : g.benign.metrics) names.insert(k);
    {
        std::ofstream os(stem.string() + ".csv");
        if (!os) throw ResourceError("cannot write " + stem.string() + ".csv");
        os << std::setprecision(17) << "label,run";
        for (const auto& n : names) os << ',' << n << ",delta_" << n;
        os << '\n' << "benign," << g.benign.id;
        for (const auto& n : names) os << ',' << g.benign.metrics.at(n) << ",0";
        os << '\n';
        for (const auto& r : g.rows) {
            os << r.label << ',' << r.record.id;
            for (const auto& n : names) os << ',' << r.record.metrics.at(n) << ',' << r.delta.at(n);
            os << '\n';
        }
    }
    nlohmann::json j = {{"benign", g.benign.to_json()}, {"rows", nlohmann::json::array()}, {"warnings", g.warnings}};
    for (const auto& r : g.rows) j["rows"].push_back({{"label", r.label}, {"record", r.record.to_json()}, {"delta", r.delta}});
    std::ofstream(stem.string() + ".json") << std::setprecision(17) << j.dump(2) << '\n';
    if (!plot_metric.empty() && !g.rows.empty() && names.count(plot_metric)) {
        std::vector<double> v;
        for (const auto& r : g.rows) v.push_back(r.delta.at(plot_metric));
        bar_chart(stem.string() + ".png", v);
    }
}

std::vector<MetricReport> full_report(const fs::path& runs_dir, const fs::path& out_dir) {
    if (!fs::is_directory(runs_dir)) throw DataError("not a directory: " + runs_dir.string());
    std::vector<fs::path> paths;
    for (const auto& e : fs::recursive_directory_iterator(runs_dir)) {
        if (e.is_regular_file() && e.path().filename() == "record.json") paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    std::map<std::string, std::vector<RunRecord>> groups;
    for (const auto& p : paths) {
        RunRecord r = read_record(p);
        check_artifacts(r);
        const auto cfg = r.config();
        nlohmann::json key = cfg.comparability_key();
        key["hashes"] = r.checkpoint_hashes;
        groups[key.dump()].push_back(std::move(r));
    }
    std::vector<MetricReport> all;
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& [key, runs] : groups) {
        const auto benign = std::find_if(runs.begin(), runs.end(), [](const RunRecord& r) { return r.config().attack == "none"; });
        if (benign == runs.end()) {
            throw ComparabilityError("runs " + runs.front().id + "... have no benign run with the same generation setup");
        }
        auto to_run = [](const RunRecord& r) {
            const auto c = r.config();
            return MetricRun{c.attack_label() + "@" + r.id, r.metrics, static_cast<size_t>(c.images),
                             c.comparability_key()};
        };
        std::vector<MetricRun> attacked;
        for (const auto& r : runs)
            if (&r != &*benign) attacked.push_back(to_run(r));
        auto reps = delta_report(to_run(*benign), attacked);
        summary.push_back({{"group", nlohmann::json::parse(key)}, {"runs", runs.size()}});
        all.insert(all.end(), reps.begin(), reps.end());
    }
    fs::create_directories(out_dir);
    write_reports_csv(all, out_dir / "report.csv");
    nlohmann::json j = {{"groups", summary}, {"reports", nlohmann::json::array()}};
    for (const auto& r : all) j["reports"].push_back(to_json(r));
    // Bound reports and analysis sidecars found next to the runs.
    j["bounds"] = nlohmann::json::array();
    for (const auto& e : fs::recursive_directory_iterator(runs_dir)) {
        if (e.is_regular_file() && e.path().filename() == "bound.json") {
            std::ifstream in(e.path());
            j["bounds"].push_back({{"path", e.path().string()}, {"report", nlohmann::json::parse(in)}});
        }
    }
    std::ofstream(out_dir / "report.json") << std::setprecision(17) << j.dump(2) << '\n';
    return all;
}

}  // namespace ldmt
