#include "ppdeid/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "ppdeid/core/error.hpp"
#include "ppdeid/core/hash.hpp"
#include "ppdeid/data/synthetic.hpp"
#include "ppdeid/eval/attribute.hpp"
#include "ppdeid/eval/evaluation.hpp"
#include "ppdeid/train/trainer.hpp"

namespace ppdeid {

namespace fs = std::filesystem;

namespace {

uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return 0;
    std::vector<char> buf(1 << 16);
    uint64_t h = 0xcbf29ce484222325ULL;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h = fnv1a64(buf.data(), static_cast<size_t>(in.gcount()), h);
    }
    return h;
}

/// One RunManifest per command, written alongside the primary outputs.
/// The timestamp lives here and only here; primary artifacts stay
/// byte-deterministic.
void write_run_manifest(const std::string& dir, const std::string& command,
                        const std::string& config_path, uint64_t config_hash, uint64_t seed,
                        const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["config_path"] = config_path;
    j["config_hash"] = hex64(config_hash);
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    j["timestamp_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    nlohmann::json sums = nlohmann::json::object();
    for (const auto& o : outputs)
        if (fs::exists(o) && fs::is_regular_file(o)) sums[o] = hex64(file_checksum(o));
    j["artifact_checksums"] = sums;
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / (command + "_run_manifest.json"));
    out << j.dump(2) << "\n";
}

struct LoadedGroup {
    std::vector<ManifestRecord> records;
    std::vector<GrayImage> images;      // aligned with records
    std::vector<std::string> subjects;  // aligned with records
};

LoadedGroup load_group(const std::string& manifest_path, const std::string& group_name) {
    auto loaded = load_manifest(manifest_path);
    for (const auto& f : loaded.failures) std::cerr << "warning: " << f << "\n";
    std::vector<ManifestRecord> records;
    if (group_name.empty()) {
        records = loaded.records;
    } else {
        auto part = partition_groups(loaded.records);
        for (const auto& w : part.warnings) std::cerr << "warning: " << w << "\n";
        records = part.groups[parse_group_key(group_name)];
        if (records.empty())
            raise("data_pipeline", "EmptyGroup", "group " + group_name + " has no records");
    }
    LoadedGroup out;
    out.records = std::move(records);
    for (const auto& r : out.records) {
        out.images.push_back(load_image(r.image_path, r.subject_id).pixels);
        out.subjects.push_back(r.subject_id);
    }
    return out;
}

std::vector<GrayImage> images_of(const LoadedGroup& g, const std::vector<ManifestRecord>& recs) {
    std::map<std::string, const GrayImage*> by_path;
    for (size_t i = 0; i < g.records.size(); ++i) by_path[g.records[i].image_path] = &g.images[i];
    std::vector<GrayImage> out;
    for (const auto& r : recs) out.push_back(*by_path.at(r.image_path));
    return out;
}

std::vector<PairSample> materialize_pairs(const std::vector<RecordPair>& rec_pairs) {
    std::map<std::string, GrayImage> cache;
    auto fetch = [&cache](const ManifestRecord& r) -> FaceImage {
        auto it = cache.find(r.image_path);
        if (it == cache.end())
            it = cache.emplace(r.image_path, load_image(r.image_path).pixels).first;
        FaceImage f;
        f.pixels = it->second;
        f.source_path = r.image_path;
        f.subject_id = r.subject_id;
        return f;
    };
    std::vector<PairSample> out;
    out.reserve(rec_pairs.size());
    for (const auto& rp : rec_pairs) out.push_back({fetch(rp.a), fetch(rp.b), rp.indicator});
    return out;
}

int attribute_label_age(const ManifestRecord& r) {
    switch (age_band_of(r.age)) {
        case AgeBand::youth: return 0;
        case AgeBand::middle: return 1;
        default: return 2;
    }
}

int attribute_label_race(const ManifestRecord& r) { return r.race == Race::black ? 0 : 1; }

std::vector<std::string> png_files_sorted(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (ext == ".png" || ext == ".pgm") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

TrainConfig resolve_config(const std::string& config_path, std::optional<uint64_t> seed,
                           const std::string& ablation, std::optional<int> epochs,
                           std::optional<int> batch_size) {
    TrainConfig cfg = config_path.empty() ? TrainConfig{} : TrainConfig::load_file(config_path);
    // precedence: CLI flag > config file > default
    if (seed) cfg.seed = *seed;
    if (!ablation.empty()) cfg.ablation = parse_ablation(ablation);
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    return cfg;
}

std::unique_ptr<DetectorAdapter> make_detector(const std::vector<GrayImage>& train_faces,
                                               uint64_t seed) {
    if (const char* exe = std::getenv("PPDEID_DETECTOR"); exe && *exe)
        return std::make_unique<ProcessDetector>(exe);
    return BuiltinDetector::train(train_faces, seed);
}

struct EvalArtifacts {
    EvalReport report;
    std::vector<std::string> files;
};

EvalArtifacts run_evaluation(const std::string& manifest_path, const std::string& group,
                             const CheckpointBlob& train_blob, LightCnn9<float>& eval_verif,
                             const std::string& out_dir, int pair_budget) {
    nlohmann::json meta = nlohmann::json::parse(train_blob.meta_json);
    TrainConfig cfg = TrainConfig::parse(meta.at("config").get<std::string>());
    TrainState state = restore_train_state(train_blob, nullptr);

    LoadedGroup g = load_group(manifest_path, group);
    TrainTestSplit split = split_train_test(g.records, 0.9, cfg.seed);
    std::vector<GrayImage> train_images = images_of(g, split.train);
    std::vector<GrayImage> test_images = images_of(g, split.test);

    const int n_pairs = std::min(pair_budget, 4 * static_cast<int>(split.test.size()));
    auto test_pairs = materialize_pairs(
        sample_pairs(split.test, std::max(10, n_pairs), 0.5, derive_seed(cfg.seed, 0xe7a1)));
    ThresholdCalibration cal = calibrate_threshold(eval_verif, test_pairs, 10);

    std::vector<GrayImage> deid_train = deidentify_batch(state.gen, train_images);
    std::vector<GrayImage> deid_test = deidentify_batch(state.gen, test_images);

    EvalReport report;
    report.group = group.empty() ? "all" : group;
    report.ablation = cfg.ablation;
    report.config_hash = cfg.hash();
    report.threshold = cal.threshold;
    report.original_deid_rate = original_pair_deid_rate(eval_verif, test_pairs, cal.threshold);
    report.deid_rate_train = deid_rate_images(eval_verif, train_images, deid_train, cal.threshold);
    report.deid_rate_test = deid_rate_images(eval_verif, test_images, deid_test, cal.threshold);

    std::vector<LabeledImage> generated, gallery;
    for (size_t i = 0; i < split.test.size(); ++i) {
        generated.push_back({split.test[i].subject_id, deid_test[i]});
        gallery.push_back({split.test[i].subject_id, test_images[i]});
    }
    report.ids_count = ids_count(generated, gallery, eval_verif, cal.threshold);

    auto detector = make_detector(train_images, cfg.seed);
    report.detection_rate_original_unpadded = detection_rate(*detector, test_images, 0);
    report.detection_rate_original_padded = detection_rate(*detector, test_images, 50);
    report.detection_rate_deid_unpadded = detection_rate(*detector, deid_test, 0);
    report.detection_rate_deid_padded = detection_rate(*detector, deid_test, 50);

    {
        AttributeClassifier age("age_band", {"youth", "middle", "senior"},
                                derive_seed(cfg.seed, 0xa6e));
        std::vector<int> train_labels, test_labels;
        for (const auto& r : split.train) train_labels.push_back(attribute_label_age(r));
        for (const auto& r : split.test) test_labels.push_back(attribute_label_age(r));
        age.fit(train_images, train_labels, 300, derive_seed(cfg.seed, 0xa6f));
        report.attribute_accuracy["age_band"] = attribute_accuracy(age, deid_test, test_labels);

        AttributeClassifier race("race", {"black", "white"}, derive_seed(cfg.seed, 0x4ace));
        std::vector<int> train_race, test_race;
        for (const auto& r : split.train) train_race.push_back(attribute_label_race(r));
        for (const auto& r : split.test) test_race.push_back(attribute_label_race(r));
        race.fit(train_images, train_race, 300, derive_seed(cfg.seed, 0x4acf));
        report.attribute_accuracy["race"] = attribute_accuracy(race, deid_test, test_race);
    }

    report.mean_ssim = mean_ssim(test_images, deid_test);

    fs::create_directories(out_dir);
    EvalArtifacts artifacts;
    const std::string json_path = (fs::path(out_dir) / "report.json").string();
    const std::string csv_path = (fs::path(out_dir) / "report.csv").string();
    const std::string montage_path = (fs::path(out_dir) / "montage.png").string();
    write_report_json(json_path, report);
    write_report_csv(csv_path, report);
    const size_t tiles = std::min<size_t>(8, test_images.size());
    montage({test_images.begin(), test_images.begin() + tiles},
            {deid_test.begin(), deid_test.begin() + tiles}, montage_path);
    artifacts.report = report;
    artifacts.files = {json_path, csv_path, montage_path};
    return artifacts;
}

} // namespace

int cli_run(const std::vector<std::string>& args) {
    CLI::App app{"PP-GAN face de-identification toolkit"};
    app.require_subcommand(1);

    // --- synth-fixture ---
    auto* synth = app.add_subcommand("synth-fixture", "generate the synthetic identity dataset");
    std::string synth_out;
    int synth_subjects = 10, synth_per_subject = 20;
    uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--subjects", synth_subjects);
    synth->add_option("--per-subject", synth_per_subject);
    synth->add_option("--seed", synth_seed);

    // --- pretrain-verificator ---
    auto* pretrain = app.add_subcommand("pretrain-verificator",
                                        "contrastive pretraining of the identity verificator");
    std::string pre_manifest, pre_config, pre_out, pre_group;
    std::optional<uint64_t> pre_seed;
    int pre_pairs = 1000;
    pretrain->add_option("--manifest", pre_manifest)->required();
    pretrain->add_option("--config", pre_config);
    pretrain->add_option("--out", pre_out)->required();
    pretrain->add_option("--group", pre_group);
    pretrain->add_option("--seed", pre_seed);
    pretrain->add_option("--pairs", pre_pairs);

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "train the PP-GAN system for one group");
    std::string tr_manifest, tr_config, tr_out, tr_group, tr_verif, tr_ablation;
    std::optional<uint64_t> tr_seed;
    std::optional<int> tr_epochs, tr_batch;
    train_cmd->add_option("--manifest", tr_manifest)->required();
    train_cmd->add_option("--config", tr_config);
    train_cmd->add_option("--out", tr_out)->required();
    train_cmd->add_option("--group", tr_group);
    train_cmd->add_option("--verificator", tr_verif);
    train_cmd->add_option("--ablation", tr_ablation);
    train_cmd->add_option("--seed", tr_seed);
    train_cmd->add_option("--epochs", tr_epochs);
    train_cmd->add_option("--batch-size", tr_batch);

    // --- deidentify ---
    auto* deid = app.add_subcommand("deidentify", "batch de-identification with a checkpoint");
    std::string de_ckpt, de_in, de_out;
    uint64_t de_seed = 0;
    bool de_stochastic = false;
    deid->add_option("--checkpoint", de_ckpt)->required();
    deid->add_option("--in", de_in)->required();
    deid->add_option("--out", de_out)->required();
    deid->add_option("--seed", de_seed);
    deid->add_flag("--stochastic", de_stochastic);

    // --- evaluate ---
    auto* eval_cmd = app.add_subcommand("evaluate", "measure the evaluation-protocol metrics");
    std::string ev_ckpt, ev_manifest, ev_verif, ev_out, ev_group;
    int ev_pairs = 200;
    eval_cmd->add_option("--checkpoint", ev_ckpt)->required();
    eval_cmd->add_option("--manifest", ev_manifest)->required();
    eval_cmd->add_option("--verificator", ev_verif)->required();
    eval_cmd->add_option("--out", ev_out)->required();
    eval_cmd->add_option("--group", ev_group);
    eval_cmd->add_option("--pairs", ev_pairs);

    // --- ablate ---
    auto* ablate = app.add_subcommand("ablate", "run the four objective set-ups for one group");
    std::string ab_manifest, ab_config, ab_out, ab_group, ab_verif;
    std::optional<uint64_t> ab_seed;
    ablate->add_option("--manifest", ab_manifest)->required();
    ablate->add_option("--config", ab_config);
    ablate->add_option("--out", ab_out)->required();
    ablate->add_option("--group", ab_group);
    ablate->add_option("--verificator", ab_verif)->required();
    ablate->add_option("--seed", ab_seed);

    // --- report ---
    auto* report_cmd = app.add_subcommand("report", "aggregate eval reports into a trade-off CSV");
    std::vector<std::string> rp_inputs;
    std::string rp_out;
    report_cmd->add_option("--runs", rp_inputs)->required();
    report_cmd->add_option("--out", rp_out)->required();

    // --- montage ---
    auto* montage_cmd = app.add_subcommand("montage", "two-row original/de-identified grid");
    std::string mo_originals, mo_generated, mo_out;
    montage_cmd->add_option("--originals", mo_originals)->required();
    montage_cmd->add_option("--generated", mo_generated)->required();
    montage_cmd->add_option("--out", mo_out)->required();

    try {
        std::vector<const char*> argv;
        argv.push_back("ppdeid");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*synth) {
            SyntheticDatasetOptions options;
            options.subjects = synth_subjects;
            options.per_subject = synth_per_subject;
            options.seed = synth_seed;
            const std::string manifest = generate_synthetic_dataset(synth_out, options);
            write_run_manifest(synth_out, "synth-fixture", "", 0, synth_seed, {}, {manifest});
            std::cout << "fixture written to " << synth_out << "\n";
        } else if (*pretrain) {
            TrainConfig cfg = resolve_config(pre_config, pre_seed, "", {}, {});
            LoadedGroup g = load_group(pre_manifest, pre_group);
            TrainTestSplit split = split_train_test(g.records, 0.9, cfg.seed);
            auto pairs = materialize_pairs(
                sample_pairs(split.train, pre_pairs, 0.5, derive_seed(cfg.seed, 0x9a17)));
            LightCnn9<float> net(derive_seed(cfg.seed, 0x76317631ULL),
                                 VerificatorSchedule::scaled(cfg.verif_width));
            PretrainResult result = pretrain_verificator(net, pairs, cfg);
            fs::create_directories(fs::path(pre_out).parent_path().empty()
                                       ? "."
                                       : fs::path(pre_out).parent_path().string());
            save_checkpoint(pre_out, verificator_checkpoint(net, cfg));
            const std::string dir = fs::path(pre_out).parent_path().string().empty()
                                        ? "."
                                        : fs::path(pre_out).parent_path().string();
            write_run_manifest(dir, "pretrain-verificator", pre_config, cfg.hash(), cfg.seed,
                               {pre_manifest}, {pre_out});
            for (size_t e = 0; e < result.epoch_losses.size(); ++e)
                std::cout << "epoch " << e << " loss " << result.epoch_losses[e] << "\n";
        } else if (*train_cmd) {
            TrainConfig cfg = resolve_config(tr_config, tr_seed, tr_ablation, tr_epochs, tr_batch);
            std::shared_ptr<LightCnn9<float>> verif;
            if (cfg.needs_verificator()) {
                if (tr_verif.empty())
                    raise("training", "MissingVerificator",
                          "ablation " + std::string(to_string(cfg.ablation)) +
                              " requires --verificator");
                verif = std::make_shared<LightCnn9<float>>(
                    verificator_from_checkpoint(load_checkpoint(tr_verif)));
            }
            LoadedGroup g = load_group(tr_manifest, tr_group);
            TrainTestSplit split = split_train_test(g.records, 0.9, cfg.seed);
            std::vector<GrayImage> train_images = images_of(g, split.train);
            const std::string dir = fs::path(tr_out).parent_path().string().empty()
                                        ? "."
                                        : fs::path(tr_out).parent_path().string();
            TrainRunResult result = train(train_images, cfg, verif, dir);
            save_checkpoint(tr_out, result.checkpoint);
            const std::string history_path = tr_out + ".history.csv";
            write_history_csv(history_path, result.history);
            write_run_manifest(dir, "train", tr_config, cfg.hash(), cfg.seed,
                               {tr_manifest, tr_verif}, {tr_out, history_path});
            std::cout << "trained " << result.history.size() << " steps\n";
        } else if (*deid) {
            CheckpointBlob blob = load_checkpoint(de_ckpt);
            TrainState state = restore_train_state(blob, nullptr);
            fs::create_directories(de_out);
            std::vector<std::string> outputs;
            Rng rng(derive_seed(de_seed, 0xde1dULL));
            for (const auto& file : png_files_sorted(de_in)) {
                GrayImage img = load_image(file).pixels;
                std::vector<const GrayImage*> one{&img};
                Tensor<float> x = to_tensor(one);
                Tensor<float> y = state.gen.forward(
                    x, nn::Phase::eval,
                    de_stochastic ? NoiseMode::stochastic : NoiseMode::deterministic, &rng);
                const std::string out_path =
                    (fs::path(de_out) / fs::path(file).filename()).string();
                write_gray_image(tensor_slice_to_image(y, 0), out_path);
                outputs.push_back(out_path);
            }
            if (outputs.empty())
                raise("data_pipeline", "EmptyManifest", "no PNG/PGM inputs in " + de_in);
            write_run_manifest(de_out, "deidentify", "", blob.config_hash, de_seed, {de_ckpt, de_in},
                               outputs);
            std::cout << "de-identified " << outputs.size() << " images\n";
        } else if (*eval_cmd) {
            CheckpointBlob train_blob = load_checkpoint(ev_ckpt);
            LightCnn9<float> eval_verif =
                verificator_from_checkpoint(load_checkpoint(ev_verif));
            EvalArtifacts artifacts = run_evaluation(ev_manifest, ev_group, train_blob, eval_verif,
                                                     ev_out, ev_pairs);
            write_run_manifest(ev_out, "evaluate", "", train_blob.config_hash,
                               load_checkpoint(ev_ckpt).step, {ev_ckpt, ev_manifest, ev_verif},
                               artifacts.files);
            std::cout << "deid_rate_test " << artifacts.report.deid_rate_test << " mean_ssim "
                      << artifacts.report.mean_ssim << "\n";
        } else if (*ablate) {
            TrainConfig base = resolve_config(ab_config, ab_seed, "", {}, {});
            auto verif = std::make_shared<LightCnn9<float>>(
                verificator_from_checkpoint(load_checkpoint(ab_verif)));
            LoadedGroup g = load_group(ab_manifest, ab_group);
            TrainTestSplit split = split_train_test(g.records, 0.9, base.seed);
            std::vector<GrayImage> train_images = images_of(g, split.train);
            std::vector<GrayImage> test_images = images_of(g, split.test);
            auto test_pairs = materialize_pairs(sample_pairs(
                split.test, std::max(10, 4 * static_cast<int>(split.test.size())), 0.5,
                derive_seed(base.seed, 0xe7a1)));
            ThresholdCalibration cal = calibrate_threshold(*verif, test_pairs, 10);

            fs::create_directories(ab_out);
            std::vector<TradeoffRun> runs;
            std::vector<std::string> outputs;
            for (Ablation a : {Ablation::cgan_only, Ablation::cgan_sim, Ablation::cgan_verif,
                               Ablation::cgan_sim_verif}) {
                TrainConfig cfg = base;
                cfg.ablation = a;
                TrainRunResult result =
                    train(train_images, cfg, cfg.needs_verificator() ? verif : nullptr, ab_out);
                const std::string ckpt_path =
                    (fs::path(ab_out) / (std::string(to_string(a)) + ".ppgn")).string();
                save_checkpoint(ckpt_path, result.checkpoint);
                outputs.push_back(ckpt_path);

                TrainState state = restore_train_state(result.checkpoint,
                                                       cfg.needs_verificator() ? verif : nullptr);
                std::vector<GrayImage> deid_test = deidentify_batch(state.gen, test_images);
                TradeoffRun run;
                run.ablation = a;
                run.group = ab_group.empty() ? "all" : ab_group;
                run.deid_rate = deid_rate_images(*verif, test_images, deid_test, cal.threshold);
                run.mean_ssim = mean_ssim(test_images, deid_test);
                runs.push_back(run);
            }
            const std::string csv_path = (fs::path(ab_out) / "tradeoff.csv").string();
            write_tradeoff_csv(csv_path, runs);
            outputs.push_back(csv_path);
            write_run_manifest(ab_out, "ablate", ab_config, base.hash(), base.seed,
                               {ab_manifest, ab_verif}, outputs);
            std::cout << "ablation sweep written to " << ab_out << "\n";
        } else if (*report_cmd) {
            std::vector<TradeoffRun> runs;
            for (const auto& file : rp_inputs) {
                std::ifstream in(file);
                if (!in) raise("evaluation", "MissingFile", file);
                nlohmann::json j;
                in >> j;
                TradeoffRun run;
                run.ablation = parse_ablation(j.at("ablation").get<std::string>());
                run.group = j.at("group").get<std::string>();
                run.deid_rate = j.at("deid_rate_test").get<double>();
                run.mean_ssim = j.at("mean_ssim").get<double>();
                runs.push_back(run);
            }
            write_tradeoff_csv(rp_out, runs);
            const std::string dir = fs::path(rp_out).parent_path().string().empty()
                                        ? "."
                                        : fs::path(rp_out).parent_path().string();
            write_run_manifest(dir, "report", "", 0, 0, rp_inputs, {rp_out});
            std::cout << "trade-off table written to " << rp_out << "\n";
        } else if (*montage_cmd) {
            std::vector<GrayImage> originals, generated;
            for (const auto& f : png_files_sorted(mo_originals))
                originals.push_back(load_image(f).pixels);
            for (const auto& f : png_files_sorted(mo_generated))
                generated.push_back(load_image(f).pixels);
            montage(originals, generated, mo_out);
            const std::string dir = fs::path(mo_out).parent_path().string().empty()
                                        ? "."
                                        : fs::path(mo_out).parent_path().string();
            write_run_manifest(dir, "montage", "", 0, 0, {mo_originals, mo_generated}, {mo_out});
        }
        return 0;
    } catch (const Error& e) {
        nlohmann::json err;
        err["error"] = {{"module", e.module()}, {"kind", e.kind()}, {"detail", e.detail()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = {{"module", "cli"}, {"kind", "Internal"}, {"detail", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}

} // namespace ppdeid
