// poisonmark: dataset watermarking for poisoned training data.
//
// Subcommands: keygen, embed, detect, evaluate, bounds, verify, poison-demo.
// Exit codes: 0 success, 1 detection/verification failure, 2 usage or
// format error.

#include <cstdint>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "poisonmark/bounds.hpp"
#include "poisonmark/detect.hpp"
#include "poisonmark/embed.hpp"
#include "poisonmark/error.hpp"
#include "poisonmark/io.hpp"
#include "poisonmark/keying.hpp"
#include "poisonmark/parallel.hpp"
#include "poisonmark/partition.hpp"
#include "poisonmark/poisonlab.hpp"
#include "poisonmark/verify.hpp"

namespace pm = poisonmark;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDetectionFailure = 1;
constexpr int kExitUsage = 2;

struct GlobalOpts {
    std::size_t threads = 0;
    std::string format = "json";
    bool deterministic = false;
    std::string seed_hex;
};

pm::Seed128 parse_seed(const std::string& hex) {
    if (hex.empty()) {
        throw pm::ArgumentError("a --seed (32 hex digits) is required");
    }
    return pm::Seed128::from_hex(hex);
}

std::int64_t now_or_zero(bool deterministic) {
    return deterministic ? 0 : static_cast<std::int64_t>(std::time(nullptr));
}

std::string auth_file_json(const pm::KeyBundle& bundle) {
    static const char* digits = "0123456789abcdef";
    std::string hex;
    hex.reserve(64);
    for (const std::uint8_t b : bundle.k_auth) {
        hex.push_back(digits[b >> 4]);
        hex.push_back(digits[b & 0xF]);
    }
    json j{{"algorithm", pm::AuthTag::kAlgorithm},
           {"k_auth_hex", hex},
           {"rotation_epoch", bundle.rotation_epoch},
           {"created_at", bundle.created_at}};
    return j.dump(2) + "\n";
}

pm::AuthSecret load_auth_secret(const std::string& path) {
    json j;
    try {
        j = json::parse(pm::read_text_file(path));
    } catch (const json::exception& e) {
        throw pm::FormatError("auth key file " + path + " is not valid JSON: " +
                              e.what());
    }
    const std::string hex = j.at("k_auth_hex").get<std::string>();
    if (hex.size() != 64) {
        throw pm::FormatError("k_auth_hex must be 64 hex digits");
    }
    pm::AuthSecret secret{};
    auto nibble = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
        throw pm::FormatError("invalid hex digit in k_auth_hex");
    };
    for (std::size_t i = 0; i < 32; ++i) {
        secret[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) |
                                              nibble(hex[2 * i + 1]));
    }
    return secret;
}

// PMDS by magic, headerless CSV otherwise.
pm::LoadedDataset load_dataset_or_csv(const std::string& path) {
    {
        std::ifstream probe(path, std::ios::binary);
        if (!probe) {
            throw pm::Error("cannot open " + path);
        }
        char magic[4] = {0};
        probe.read(magic, 4);
        if (probe.gcount() == 4 && std::memcmp(magic, "PMDS", 4) == 0) {
            return pm::load_dataset(path);
        }
    }
    pm::LoadedDataset out;
    out.data = pm::import_csv(path);
    out.clip_mode = pm::ClipMode::clip;
    return out;
}

std::vector<std::string> ids_or_default(const pm::LoadedDataset& ds) {
    if (!ds.manifest.ids.empty()) return ds.manifest.ids;
    std::vector<std::string> ids;
    ids.reserve(ds.data.n_samples());
    for (std::size_t i = 0; i < ds.data.n_samples(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "row-%06zu", i);
        ids.emplace_back(buf);
    }
    return ids;
}

// ---------------------------------------------------------------- keygen --

int cmd_keygen(const GlobalOpts& global, std::size_t d, std::size_t q,
               const std::string& mode_name, const std::string& out_path,
               const std::string& auth_path, bool store_entries) {
    const pm::Seed128 seed = parse_seed(global.seed_hex);
    const pm::KeyMode mode = pm::key_mode_from_name(mode_name);
    if (q == 0) q = d;

    const pm::Rng seeder(seed);
    const auto partition = pm::make_partition(
        d, q, seeder.derive(0),
        mode == pm::KeyMode::concurrent ? pm::PartitionMode::concurrent
                                        : pm::PartitionMode::post);
    pm::Key key;
    if (mode == pm::KeyMode::concurrent) {
        key = pm::sample_concurrent_key(partition, seeder.derive(1));
    } else {
        key = pm::sample_identical_key(d, seeder.derive(1));
        key.partition = partition;
    }
    pm::write_text_file_atomic(out_path, pm::key_to_json(key, store_entries));
    std::cout << "wrote key (" << pm::key_mode_name(mode) << ", d=" << d
              << ", q=" << q << ") to " << out_path << "\n";

    if (!auth_path.empty()) {
        const auto bundle =
            pm::make_bundle(seeder.derive(2), now_or_zero(global.deterministic));
        pm::write_text_file_atomic(auth_path, auth_file_json(bundle));
        std::cout << "wrote authentication key to " << auth_path << "\n";
    }
    return kExitOk;
}

// ----------------------------------------------------------------- embed --

int cmd_embed(const GlobalOpts& global, const std::string& in_path,
              const std::string& key_path, const std::string& scheme_name_arg,
              double eps_w, double eps_p, const std::string& poison_name,
              const std::string& clip_name, const std::string& out_path,
              const std::string& tags_key_path, const std::string& tags_out,
              std::size_t trigger_dims_count, std::int64_t target_label,
              double poison_rate) {
    const pm::Scheme scheme = pm::scheme_from_name(scheme_name_arg);
    const pm::ClipMode clip =
        clip_name == "strict" ? pm::ClipMode::strict : pm::ClipMode::clip;
    const auto loaded = load_dataset_or_csv(in_path);
    const auto key = pm::key_from_json(pm::read_text_file(key_path));
    const auto ids = ids_or_default(loaded);

    pm::WatermarkPlan plan;
    plan.scheme = scheme;
    plan.budget = pm::BudgetConfig{eps_w, eps_p, 0.05};
    plan.partition = key.partition;
    if (pm::scheme_is_concurrent(scheme) &&
        plan.partition.mode != pm::PartitionMode::concurrent) {
        throw pm::ModeError("scheme " + pm::scheme_name(scheme) +
                            " needs a concurrent-mode key file");
    }
    if (pm::scheme_is_sample_wise(scheme)) {
        if (!key.seed) {
            throw pm::ArgumentError(
                "sample-wise schemes need a key file that stores a seed");
        }
        plan.key_source = pm::KeyStream{*key.seed};
    } else {
        plan.key_source = key;
    }

    // Poison deltas (zero when eps_p == 0 or --poison none).
    const std::size_t n = loaded.data.n_samples();
    const std::size_t d = loaded.data.dim();
    const bool concurrent = pm::scheme_is_concurrent(scheme);
    std::vector<std::size_t> full_dims(d);
    std::iota(full_dims.begin(), full_dims.end(), std::size_t{0});
    const std::vector<std::size_t>& support =
        concurrent ? plan.partition.poison_dims : full_dims;
    std::vector<double> poison(n * d, 0.0);
    if (eps_p > 0.0 && poison_name != "none") {
        const pm::Seed128 poison_seed =
            global.seed_hex.empty() ? pm::Seed128{0x706f69736f6eULL, 0}
                                    : parse_seed(global.seed_hex);
        if (poison_name == "random") {
            poison = pm::random_poison_matrix(n, d, eps_p, support, poison_seed);
        } else if (poison_name == "availability") {
            poison = pm::availability_poison_rows(loaded.data, eps_p, support,
                                                  poison_seed);
        } else if (poison_name == "backdoor") {
            const auto dims = [&] {
                std::vector<std::size_t> out(
                    support.begin(),
                    support.begin() +
                        std::min(trigger_dims_count, support.size()));
                return out;
            }();
            poison = pm::backdoor_poison_rows(loaded.data, eps_p, dims,
                                              target_label, poison_rate,
                                              poison_seed)
                         .train_delta;
        } else {
            throw pm::ArgumentError("unknown poison generator '" + poison_name +
                                    "'");
        }
    }

    pm::DatasetManifest manifest;
    manifest.ids = ids;
    manifest.provenance["scheme"] = pm::scheme_name(scheme);
    manifest.provenance["eps_w"] = std::to_string(eps_w);
    manifest.provenance["eps_p"] = std::to_string(eps_p);
    manifest.provenance["key_q"] = std::to_string(key.q());
    if (!global.deterministic) {
        manifest.provenance["created_at"] =
            std::to_string(now_or_zero(false));
    }

    if (concurrent) {
        const auto pm_matrix = pm::embed_poisoning_concurrent(
            loaded.data, poison, plan, clip, ids);
        pm::store_dataset(pm_matrix, out_path, manifest);
        std::cout << "embedded (" << pm::scheme_name(scheme)
                  << "), clipped_fraction=" << pm_matrix.clipped_fraction()
                  << ", wrote " << out_path << "\n";
    } else {
        // Post-poisoning: apply the poison first, then watermark on top.
        std::vector<double> values(loaded.data.values());
        std::size_t clipped = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double v = values[i] + poison[i];
            if (v < 0.0 || v > 1.0) {
                if (clip == pm::ClipMode::strict) {
                    throw pm::RangeError(
                        "strict mode: poisoned value outside [0,1] at entry " +
                        std::to_string(i));
                }
                ++clipped;
            }
            values[i] = std::clamp(v, 0.0, 1.0);
        }
        std::optional<std::vector<std::int64_t>> labels;
        if (loaded.data.has_labels()) labels = loaded.data.labels();
        const auto poisoned = pm::DataMatrix::unchecked(
            n, d, std::move(values), std::move(labels));
        const auto pm_matrix = pm::embed_post_poisoning(poisoned, plan, clip, ids);
        const double frac =
            pm_matrix.clipped_fraction() +
            static_cast<double>(clipped) / static_cast<double>(n * d);
        pm::store_dataset(pm_matrix.materialize(), out_path, manifest,
                          pm_matrix.clip_mode());
        std::cout << "embedded (" << pm::scheme_name(scheme)
                  << "), clipped_fraction=" << frac << ", wrote " << out_path
                  << "\n";
    }

    if (!tags_key_path.empty()) {
        const auto secret = load_auth_secret(tags_key_path);
        const auto stored = pm::load_dataset(out_path);
        std::vector<pm::AuthTag> tags;
        tags.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            tags.push_back(
                pm::compute_auth_tag(secret, ids[i], stored.data.row(i)));
        }
        const std::string path =
            tags_out.empty() ? out_path + ".tags.json" : tags_out;
        pm::write_text_file_atomic(path, pm::tags_to_json(tags));
        std::cout << "wrote " << tags.size() << " tags to " << path << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- detect --

int cmd_detect(const GlobalOpts& global, const std::string& in_path,
               const std::string& key_path, const std::string& scheme_name_arg,
               double eps_w, std::optional<double> tau_arg,
               const std::string& tags_path, const std::string& auth_key_path,
               const std::string& out_path) {
    const auto loaded = load_dataset_or_csv(in_path);
    const auto key = pm::key_from_json(pm::read_text_file(key_path));
    const pm::Scheme scheme = pm::scheme_from_name(scheme_name_arg);
    const auto ids = ids_or_default(loaded);

    const double tau = tau_arg.value_or(
        pm::default_threshold(key.q(), eps_w, scheme));

    // Tag verification happens before any scoring; tampered rows get no
    // decision.
    std::vector<bool> tampered(loaded.data.n_samples(), false);
    std::size_t tampered_count = 0;
    if (!tags_path.empty()) {
        if (auth_key_path.empty()) {
            throw pm::ArgumentError("--tags requires --auth-key");
        }
        const auto secret = load_auth_secret(auth_key_path);
        const auto tags = pm::tags_from_json(pm::read_text_file(tags_path));
        if (tags.size() != loaded.data.n_samples()) {
            throw pm::FormatError("tag sidecar row count does not match dataset");
        }
        for (std::size_t i = 0; i < tags.size(); ++i) {
            const bool ok =
                tags[i].sample_id == ids[i] &&
                pm::verify_auth_tag(secret, ids[i], loaded.data.row(i), tags[i]);
            tampered[i] = !ok;
            tampered_count += !ok;
        }
    }

    std::vector<pm::DetectionResult> results;
    if (pm::scheme_is_sample_wise(scheme)) {
        if (!key.seed) {
            throw pm::ArgumentError(
                "sample-wise detection needs a key file that stores a seed");
        }
        if (loaded.manifest.ids.empty()) {
            throw pm::ArgumentError(
                "sample-wise detection needs sample ids in the dataset manifest");
        }
        results = pm::classify_sample_wise(
            key.partition,
            pm::scheme_is_concurrent(scheme) ? pm::KeyMode::concurrent
                                             : pm::KeyMode::identical,
            *key.seed, loaded.data, ids, tau);
    } else {
        results = pm::classify(key, loaded.data, tau);
        for (std::size_t i = 0; i < results.size(); ++i) {
            results[i].sample_id = ids[i];
        }
    }

    std::ostringstream csv;
    csv.precision(17);
    csv << "sample_id,score,decision\n";
    std::size_t positives = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        csv << ids[i] << ",";
        if (tampered[i]) {
            csv << ",tampered\n";
            continue;
        }
        csv << results[i].score << "," << (results[i].decision ? 1 : 0) << "\n";
        positives += results[i].decision;
    }
    if (!out_path.empty()) pm::write_text_file_atomic(out_path, csv.str());

    const std::size_t decided = results.size() - tampered_count;
    json summary{{"n", results.size()},
                 {"tau", tau},
                 {"scheme", pm::scheme_name(scheme)},
                 {"positives", positives},
                 {"tampered", tampered_count},
                 {"positive_fraction",
                  decided == 0 ? 0.0
                               : static_cast<double>(positives) /
                                     static_cast<double>(decided)}};
    if (global.format == "csv") {
        std::cout << csv.str();
    } else {
        std::cout << summary.dump(2) << "\n";
    }
    return tampered_count > 0 ? kExitDetectionFailure : kExitOk;
}

// -------------------------------------------------------------- evaluate --

int cmd_evaluate(const GlobalOpts& global, const std::string& pos_path,
                 const std::string& neg_path, const std::string& key_path,
                 const std::string& scheme_name_arg, double eps_w) {
    const auto pos = load_dataset_or_csv(pos_path);
    const auto neg = load_dataset_or_csv(neg_path);
    const auto key = pm::key_from_json(pm::read_text_file(key_path));
    const pm::Scheme scheme = pm::scheme_from_name(scheme_name_arg);
    const auto report = pm::separation_report(key, pos.data, neg.data, key.q(),
                                              eps_w, scheme);
    if (global.format == "table") {
        std::cout << "auroc                 " << report.auroc << "\n"
                  << "pos_above_c1_fraction " << report.pos_above_c1_fraction
                  << "\n"
                  << "neg_below_c2_fraction " << report.neg_below_c2_fraction
                  << "\n"
                  << "c1                    " << report.c1 << "\n"
                  << "c2                    " << report.c2 << "\n";
    } else {
        std::cout << pm::separation_report_to_json(report);
    }
    return kExitOk;
}

// ---------------------------------------------------------------- bounds --

int cmd_bounds(const GlobalOpts& global, std::int64_t d, std::int64_t n,
               double eps_w, double eps_p, double omega, std::int64_t q) {
    const auto report = pm::evaluate_bounds(d, n, eps_w, eps_p, omega, q);
    if (global.format == "table") {
        std::cout << report.to_table();
    } else {
        std::cout << report.to_json();
    }
    return kExitOk;
}

// ---------------------------------------------------------------- verify --

int cmd_verify(const GlobalOpts& global, const std::string& suite_path,
               const std::string& out_json, const std::string& out_csv) {
    const auto configs = pm::parse_suite(pm::read_text_file(suite_path));
    const auto result = pm::run_suite(configs, global.threads);
    for (const auto& o : result.outcomes) {
        std::cout << (o.passed ? "[PASS] " : (o.expected_fail ? "[PROBE] "
                                                              : "[FAIL] "))
                  << o.label << ": empirical=" << o.empirical_success
                  << " guaranteed=" << o.guaranteed_success << " ("
                  << o.success_count << "/" << o.trial_count << ", "
                  << o.elapsed_seconds << "s)"
                  << (o.vacuous ? " [vacuous]" : "") << "\n";
    }
    if (!out_json.empty()) {
        pm::write_text_file_atomic(out_json, pm::outcomes_to_json(result));
    }
    if (!out_csv.empty()) {
        pm::write_text_file_atomic(out_csv, pm::outcomes_to_csv(result));
    }
    std::cout << (result.all_passed ? "suite passed" : "suite FAILED") << "\n";
    return result.all_passed ? kExitOk : kExitDetectionFailure;
}

// ----------------------------------------------------------- poison-demo --

pm::SweepConfig parse_sweep_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw pm::FormatError(std::string("poison-demo config parse error: ") +
                              e.what());
    }
    try {
        pm::SweepConfig cfg;
        if (j.contains("task")) {
            const auto& t = j.at("task");
            cfg.task.d = t.value("d", cfg.task.d);
            cfg.task.n_train = t.value("n_train", cfg.task.n_train);
            cfg.task.n_test = t.value("n_test", cfg.task.n_test);
            cfg.task.noise_scale = t.value("noise_scale", cfg.task.noise_scale);
            cfg.task.class_sep = t.value("class_sep", cfg.task.class_sep);
        }
        cfg.attack = pm::attack_from_name(
            j.value("attack", std::string("availability")));
        cfg.scheme = pm::scheme_from_name(
            j.value("scheme", std::string("universal-concurrent")));
        cfg.q_values = j.at("q_values").get<std::vector<std::size_t>>();
        cfg.eps_w = j.value("eps_w", cfg.eps_w);
        cfg.eps_p = j.value("eps_p", cfg.eps_p);
        for (const auto& s : j.at("seeds")) {
            cfg.seeds.push_back(pm::Seed128::from_hex(s.get<std::string>()));
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            cfg.train.hidden =
                t.value("hidden", std::vector<std::size_t>{64});
            cfg.train.epochs = t.value("epochs", cfg.train.epochs);
            cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
            cfg.train.learning_rate =
                t.value("learning_rate", cfg.train.learning_rate);
            cfg.train.momentum = t.value("momentum", cfg.train.momentum);
            cfg.train.cosine_decay =
                t.value("cosine_decay", cfg.train.cosine_decay);
        }
        cfg.trigger_dim_count =
            j.value("trigger_dim_count", cfg.trigger_dim_count);
        cfg.target_label = j.value("target_label", cfg.target_label);
        cfg.poison_rate = j.value("poison_rate", cfg.poison_rate);
        return cfg;
    } catch (const json::exception& e) {
        throw pm::FormatError(std::string("malformed poison-demo config: ") +
                              e.what());
    }
}

int cmd_poison_demo(const GlobalOpts& global, const std::string& config_path,
                    const std::string& out_csv, const std::string& out_json) {
    const auto cfg = parse_sweep_config(pm::read_text_file(config_path));
    const auto report = pm::q_sweep(cfg, global.threads);
    if (!out_csv.empty()) {
        pm::write_text_file_atomic(out_csv, report.to_csv());
    }
    if (!out_json.empty()) {
        pm::write_text_file_atomic(out_json, report.to_json());
    }
    if (global.format == "csv") {
        std::cout << report.to_csv();
    } else {
        std::cout << report.to_json();
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"poisonmark: provable dataset watermarking for poisoned data"};
    app.require_subcommand(1);

    GlobalOpts global;
    app.add_option("--threads", global.threads,
                   "worker threads (0 = all cores)");
    app.add_option("--format", global.format, "output format")
        ->check(CLI::IsMember({"json", "csv", "table"}));
    app.add_flag("--deterministic", global.deterministic,
                 "suppress timestamps for byte-identical outputs");
    app.add_option("--seed", global.seed_hex, "128-bit seed as 32 hex digits");

    // keygen
    auto* keygen = app.add_subcommand("keygen", "generate a detection key");
    std::size_t kg_d = 0, kg_q = 0;
    std::string kg_mode = "identical", kg_out, kg_auth;
    bool kg_entries = false;
    keygen->add_option("--d", kg_d, "data dimension")->required();
    keygen->add_option("--q", kg_q, "watermark length (default: d)");
    keygen->add_option("--mode", kg_mode, "key mode")
        ->check(CLI::IsMember({"identical", "concurrent"}));
    keygen->add_option("--out", kg_out, "key file path")->required();
    keygen->add_option("--auth", kg_auth,
                       "also write an authentication key file");
    keygen->add_flag("--store-entries", kg_entries,
                     "store explicit entries instead of the seed");

    // embed
    auto* embed = app.add_subcommand("embed", "poison and/or watermark a dataset");
    std::string em_in, em_key, em_scheme = "universal-post";
    double em_eps_w = 16.0 / 255.0, em_eps_p = 0.0;
    std::string em_poison = "random", em_clip = "clip", em_out, em_tags_key,
                em_tags_out;
    std::size_t em_trigger_dims = 128;
    std::int64_t em_target = 1;
    double em_rate = 0.1;
    embed->add_option("--in", em_in, "input PMDS dataset")->required();
    embed->add_option("--key", em_key, "key file")->required();
    embed->add_option("--scheme", em_scheme, "watermarking scheme")
        ->check(CLI::IsMember({"sample-wise-post", "sample-wise-concurrent",
                               "universal-post", "universal-concurrent"}));
    embed->add_option("--eps-w", em_eps_w, "watermark budget (L-infinity)");
    embed->add_option("--eps-p", em_eps_p, "poison budget (L-infinity)");
    embed->add_option("--poison", em_poison, "poison generator")
        ->check(CLI::IsMember({"none", "random", "availability", "backdoor"}));
    embed->add_option("--clip", em_clip, "range handling")
        ->check(CLI::IsMember({"strict", "clip"}));
    embed->add_option("--out", em_out, "output PMDS dataset")->required();
    embed->add_option("--tags", em_tags_key,
                      "auth key file; writes an HMAC tag sidecar");
    embed->add_option("--tags-out", em_tags_out,
                      "tag sidecar path (default: <out>.tags.json)");
    embed->add_option("--trigger-dims", em_trigger_dims,
                      "backdoor trigger dimension count");
    embed->add_option("--target", em_target, "backdoor target label");
    embed->add_option("--poison-rate", em_rate, "backdoor poison rate");

    // detect
    auto* detect = app.add_subcommand("detect", "score rows against a key");
    std::string dt_in, dt_key, dt_scheme = "universal-post", dt_tags,
                dt_auth_key, dt_out;
    double dt_eps_w = 16.0 / 255.0;
    double dt_tau_value = 0.0;
    bool dt_tau_set = false;
    detect->add_option("--in", dt_in, "input PMDS dataset")->required();
    detect->add_option("--key", dt_key, "key file")->required();
    detect->add_option("--scheme", dt_scheme, "watermarking scheme")
        ->check(CLI::IsMember({"sample-wise-post", "sample-wise-concurrent",
                               "universal-post", "universal-concurrent"}));
    detect->add_option("--eps-w", dt_eps_w,
                       "watermark budget (sets default threshold q*eps_w/2)");
    detect
        ->add_option_function<double>(
            "--tau",
            [&](const double v) {
                dt_tau_value = v;
                dt_tau_set = true;
            },
            "detection threshold override")
        ->type_name("FLOAT");
    detect->add_option("--tags", dt_tags, "HMAC tag sidecar to verify");
    detect->add_option("--auth-key", dt_auth_key, "authentication key file");
    detect->add_option("--out", dt_out, "scores CSV path");

    // evaluate
    auto* evaluate = app.add_subcommand(
        "evaluate", "separation report between two datasets");
    std::string ev_pos, ev_neg, ev_key, ev_scheme = "universal-post";
    double ev_eps_w = 16.0 / 255.0;
    evaluate->add_option("--pos", ev_pos, "watermarked dataset")->required();
    evaluate->add_option("--neg", ev_neg, "benign dataset")->required();
    evaluate->add_option("--key", ev_key, "key file")->required();
    evaluate->add_option("--scheme", ev_scheme, "scheme for the constants")
        ->check(CLI::IsMember({"sample-wise-post", "sample-wise-concurrent",
                               "universal-post", "universal-concurrent"}));
    evaluate->add_option("--eps-w", ev_eps_w, "watermark budget");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "evaluate minimum-length and "
                                                "failure-probability bounds");
    std::int64_t bd_d = 0, bd_n = 0, bd_q = 0;
    double bd_eps_w = 0.0, bd_eps_p = 0.0, bd_omega = 0.0;
    bounds->add_option("--d", bd_d, "data dimension")->required();
    bounds->add_option("--n", bd_n, "dataset size")->required();
    bounds->add_option("--eps-w", bd_eps_w, "watermark budget")->required();
    bounds->add_option("--eps-p", bd_eps_p, "poison budget");
    bounds->add_option("--omega", bd_omega, "failure probability")->required();
    bounds->add_option(
        "--q", bd_q,
        "watermark length for the failure probabilities "
        "(default: q_min_universal_post_most)");

    // verify
    auto* verify = app.add_subcommand(
        "verify", "run a Monte Carlo theorem-certification suite");
    std::string vf_suite, vf_json, vf_csv;
    verify->add_option("--suite", vf_suite, "suite config JSON")->required();
    verify->add_option("--out-json", vf_json, "write outcomes JSON");
    verify->add_option("--out-csv", vf_csv, "write outcomes CSV");

    // poison-demo
    auto* demo = app.add_subcommand(
        "poison-demo", "toy poisoning lab q-sweep (trend reproduction)");
    std::string pd_config, pd_csv, pd_json;
    demo->add_option("--config", pd_config, "sweep config JSON")->required();
    demo->add_option("--out-csv", pd_csv, "write per-cell CSV");
    demo->add_option("--out-json", pd_json, "write aggregate JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (global.threads != 0) pm::set_default_thread_count(global.threads);

    try {
        if (keygen->parsed()) {
            return cmd_keygen(global, kg_d, kg_q, kg_mode, kg_out, kg_auth,
                              kg_entries);
        }
        if (embed->parsed()) {
            return cmd_embed(global, em_in, em_key, em_scheme, em_eps_w,
                             em_eps_p, em_poison, em_clip, em_out, em_tags_key,
                             em_tags_out, em_trigger_dims, em_target, em_rate);
        }
        if (detect->parsed()) {
            return cmd_detect(global, dt_in, dt_key, dt_scheme, dt_eps_w,
                              dt_tau_set ? std::optional<double>(dt_tau_value)
                                         : std::nullopt,
                              dt_tags, dt_auth_key, dt_out);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(global, ev_pos, ev_neg, ev_key, ev_scheme,
                                ev_eps_w);
        }
        if (bounds->parsed()) {
            return cmd_bounds(global, bd_d, bd_n, bd_eps_w, bd_eps_p, bd_omega,
                              bd_q);
        }
        if (verify->parsed()) {
            return cmd_verify(global, vf_suite, vf_json, vf_csv);
        }
        if (demo->parsed()) {
            return cmd_poison_demo(global, pd_config, pd_csv, pd_json);
        }
    } catch (const pm::RangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDetectionFailure;
    } catch (const pm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
