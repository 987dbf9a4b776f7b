// dscnn: batch command-line front end for the depth-CNN scene recognition
// toolkit. Commands: gen-data, train, eval, diag. Exit codes: 0 success,
// 1 runtime/I-O failure, 2 usage error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "dscnn/dscnn.hpp"

namespace fs = std::filesystem;
using namespace dscnn;

namespace {

/// Usage problems detected after flag parsing (bad stage combinations,
/// missing --init, ...): message + exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config files: `key=value` lines, '#' comments. Entries are expanded into
// `--key value` arguments placed before the real command line, so explicit
// flags override file values (scalar options keep the last occurrence).

std::vector<std::string> read_config_args(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
    std::vector<std::string> args;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '#') continue;
        const std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos || eq == 0)
            throw std::runtime_error("config '" + path + "' line " + std::to_string(lineno) +
                                     ": expected key=value");
        std::string key = trimmed.substr(0, eq);
        std::string value = trimmed.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        value.erase(0, value.find_first_not_of(" \t"));
        args.push_back("--" + key);
        args.push_back(value);
    }
    return args;
}

/// Rebuilds the argument list as {command, config-file entries..., explicit
/// flags...}. The --config flag itself is located by a pre-scan.
std::vector<std::string> expand_args(int argc, char** argv) {
    std::vector<std::string> raw(argv + 1, argv + argc);
    std::string config_path;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == "--config" && i + 1 < raw.size())
            config_path = raw[i + 1];
        else if (raw[i].rfind("--config=", 0) == 0)
            config_path = raw[i].substr(9);
    }
    if (config_path.empty() || raw.empty()) return raw;
    std::vector<std::string> out;
    out.push_back(raw[0]);  // subcommand name stays first
    for (const std::string& a : read_config_args(config_path)) out.push_back(a);
    out.insert(out.end(), raw.begin() + 1, raw.end());
    return out;
}

// ---------------------------------------------------------------------------
// Output plumbing.

/// Duplicates every character to two stream buffers (metrics go to stdout
/// and to metrics.log).
class TeeBuf : public std::streambuf {
  public:
    TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

  protected:
    int overflow(int c) override {
        if (c == traits_type::eof()) return traits_type::not_eof(c);
        const int ra = a_->sputc(static_cast<char>(c));
        const int rb = b_->sputc(static_cast<char>(c));
        return (ra == traits_type::eof() || rb == traits_type::eof()) ? traits_type::eof() : c;
    }
    int sync() override {
        const int ra = a_->pubsync(), rb = b_->pubsync();
        return (ra == 0 && rb == 0) ? 0 : -1;
    }

  private:
    std::streambuf* a_;
    std::streambuf* b_;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

void write_config_echo(const std::string& out_dir, const KeyValues& kv) {
    std::ofstream f(fs::path(out_dir) / "config.txt", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write config echo in '" + out_dir + "'");
    for (const auto& [k, v] : kv) f << k << '=' << v << '\n';
}

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string crc_hex(std::uint32_t crc) {
    std::ostringstream os;
    os << std::hex << std::setw(8) << std::setfill('0') << crc;
    return os.str();
}

void report_checkpoint(const std::string& path) {
    std::cout << "checkpoint\t" << path << "\tcrc32\t" << crc_hex(crc32_of_file(path)) << "\n";
}

// ---------------------------------------------------------------------------
// gen-data

struct GenParams {
    int classes = 10;
    int per_class = 20;
    int videos_per_class = 0;
    int video_frames = 45;
    int size = 32;
    double sensor_range = 5.5;
    double test_fraction = 0.25;
    std::uint64_t seed = 1;
    std::string out;
    std::string config;
};

int run_gen_data(const GenParams& p) {
    SyntheticConfig scfg;
    scfg.width = p.size;
    scfg.height = p.size;
    scfg.num_classes = p.classes;
    scfg.sensor_range = p.sensor_range;
    scfg.video_frames = p.video_frames;

    const std::vector<std::string> taxonomy = synthetic_taxonomy(p.classes);
    fs::create_directories(p.out);
    std::vector<ManifestRecord> records;
    int still_train = 0, still_test = 0, vid_train = 0, vid_test = 0;

    auto write_frame = [&](const SceneFrame& f, const std::string& stem) {
        save_ppm((fs::path(p.out) / (stem + "_rgb.ppm")).string(), f.rgb);
        save_pgm((fs::path(p.out) / (stem + "_depth.pgm")).string(), depth_to_pgm(f));
    };
    auto add_records = [&](const std::string& stem, const std::string& label, Role role,
                           const std::string& seq_id, int frame_index) {
        records.push_back({stem + "_rgb.ppm", label, Modality::rgb, role, seq_id, frame_index});
        records.push_back({stem + "_depth.pgm", label, Modality::depth, role, seq_id, frame_index});
    };

    for (int k = 0; k < p.classes; ++k) {
        const std::string& label = taxonomy[static_cast<std::size_t>(k)];
        const int n_test = static_cast<int>(p.per_class * p.test_fraction);
        const int n_train = p.per_class - n_test;
        fs::create_directories(fs::path(p.out) / "images" / label);
        for (int i = 0; i < p.per_class; ++i) {
            const SceneFrame f = generate_synthetic_image(
                scfg, k, mix_seed(p.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i)));
            char buf[32];
            std::snprintf(buf, sizeof(buf), "img_%03d", i);
            const std::string stem = "images/" + label + "/" + buf;
            const Role role = i < n_train ? Role::train : Role::test;
            (role == Role::train ? still_train : still_test)++;
            write_frame(f, stem);
            add_records(stem, label, role, "", -1);
        }

        const int v_test = static_cast<int>(p.videos_per_class * p.test_fraction);
        const int v_train = p.videos_per_class - v_test;
        for (int v = 0; v < p.videos_per_class; ++v) {
            char vbuf[32];
            std::snprintf(vbuf, sizeof(vbuf), "vid%02d", v);
            const std::string seq_id = label + "_" + vbuf;
            const Role role = v < v_train ? Role::train : Role::test;
            (role == Role::train ? vid_train : vid_test)++;
            fs::create_directories(fs::path(p.out) / "videos" / label / vbuf);
            const std::vector<SceneFrame> frames = generate_synthetic_video(
                scfg, k,
                mix_seed(p.seed, 1000 + static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(v)));
            for (std::size_t t = 0; t < frames.size(); ++t) {
                char fbuf[32];
                std::snprintf(fbuf, sizeof(fbuf), "f%03d", static_cast<int>(t));
                const std::string stem = "videos/" + label + "/" + std::string(vbuf) + "/" + fbuf;
                write_frame(frames[t], stem);
                add_records(stem, label, role, seq_id, static_cast<int>(t));
            }
        }
    }

    const std::string manifest_path = (fs::path(p.out) / "manifest.tsv").string();
    save_manifest(manifest_path, records);
    write_config_echo(p.out, {{"command", "gen-data"},
                              {"classes", std::to_string(p.classes)},
                              {"per-class", std::to_string(p.per_class)},
                              {"videos-per-class", std::to_string(p.videos_per_class)},
                              {"video-frames", std::to_string(p.video_frames)},
                              {"size", std::to_string(p.size)},
                              {"sensor-range", fmt(p.sensor_range)},
                              {"test-fraction", fmt(p.test_fraction)},
                              {"seed", std::to_string(p.seed)},
                              {"out", p.out}});

    std::cout << "still images\t" << (still_train + still_test) << "\t(train " << still_train
              << ", test " << still_test << ")\n";
    std::cout << "videos\t" << (vid_train + vid_test) << "\t(train " << vid_train << ", test "
              << vid_test << ", " << p.video_frames << " frames each)\n";
    std::cout << "records\t" << records.size() << "\n";
    std::cout << "manifest\t" << manifest_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainParams {
    std::string stage;
    std::string modality = "depth";
    std::string manifest;
    std::string out;
    std::vector<std::string> init;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int batch_size = 8;
    int epochs = 30;
    std::uint64_t seed = 1;
    double scale = 0.125;
    int fc_width = 0;
    int patch_grid = 3;
    int patch_size = 15;
    int segment_len = 0;  // 0 = default 9 at temporal, inherit from --init at joint
    int lstm_hidden = 32;
    int fusion_hidden = 32;
    int head_epochs = 40;
    std::vector<std::string> freeze;
    std::string config;
};

TrainingConfig to_training_config(const TrainParams& p) {
    TrainingConfig cfg;
    cfg.learning_rate = p.learning_rate;
    cfg.momentum = p.momentum;
    cfg.weight_decay = p.weight_decay;
    cfg.batch_size = p.batch_size;
    cfg.epochs = p.epochs;
    cfg.seed = p.seed;
    cfg.freeze_mask.insert(p.freeze.begin(), p.freeze.end());
    return cfg;
}

KeyValues train_config_echo(const TrainParams& p) {
    KeyValues kv{{"command", "train"},
                 {"stage", p.stage},
                 {"modality", p.modality},
                 {"manifest", p.manifest},
                 {"out", p.out},
                 {"learning-rate", fmt(p.learning_rate)},
                 {"momentum", fmt(p.momentum)},
                 {"weight-decay", fmt(p.weight_decay)},
                 {"batch-size", std::to_string(p.batch_size)},
                 {"epochs", std::to_string(p.epochs)},
                 {"seed", std::to_string(p.seed)},
                 {"scale", fmt(p.scale)},
                 {"fc-width", std::to_string(p.fc_width)},
                 {"patch-grid", std::to_string(p.patch_grid)},
                 {"patch-size", std::to_string(p.patch_size)},
                 {"segment-len", std::to_string(p.segment_len)},
                 {"lstm-hidden", std::to_string(p.lstm_hidden)},
                 {"fusion-hidden", std::to_string(p.fusion_hidden)},
                 {"head-epochs", std::to_string(p.head_epochs)}};
    for (const std::string& i : p.init) kv.emplace_back("init", i);
    for (const std::string& f : p.freeze) kv.emplace_back("freeze", f);
    return kv;
}

/// Training stills of one modality: still records when present, otherwise
/// the keyframes of the manifest's sequences.
StillDataset stills_or_keyframes(const Manifest& m, Modality modality, Role role) {
    StillDataset ds = load_still_dataset(m, modality, role);
    if (!ds.samples.empty()) return ds;
    return keyframes_as_stills(load_sequences(m, role), modality, m.taxonomy);
}

void check_taxonomy(const std::vector<std::string>& ckpt, const std::vector<std::string>& manifest,
                    const std::string& what) {
    if (ckpt != manifest)
        throw std::runtime_error(what + ": class taxonomy does not match the manifest");
}

Modality parse_modality(const std::string& s) { return modality_from_name(s); }

/// Segments of T keyframes; when no sequence reaches T, falls back to T=1
/// with a warning. `t` is updated to the length actually used.
std::vector<SegmentSample> segments_or_t1(const std::vector<Sequence>& seqs, int& t) {
    std::vector<SegmentSample> segs = make_segments(seqs, t, &std::cerr);
    if (segs.empty() && t > 1) {
        std::cerr << "warning: no sequence reaches T=" << t << " keyframes; behaving as T=1\n";
        t = 1;
        segs = make_segments(seqs, t, &std::cerr);
    }
    if (segs.empty()) throw std::runtime_error("no usable segments in the sequences");
    return segs;
}

int run_train(const TrainParams& p) {
    const Manifest manifest = load_manifest(p.manifest);
    const int num_classes = static_cast<int>(manifest.taxonomy.size());
    if (num_classes < 2) throw std::runtime_error("manifest has fewer than 2 classes");
    fs::create_directories(p.out);
    write_config_echo(p.out, train_config_echo(p));

    std::ofstream log_file(fs::path(p.out) / "metrics.log", std::ios::trunc);
    if (!log_file) throw std::runtime_error("cannot write metrics.log in '" + p.out + "'");
    TeeBuf tee(std::cout.rdbuf(), log_file.rdbuf());
    std::ostream log(&tee);

    const TrainingConfig cfg = to_training_config(p);
    const bool is_rgbd = p.modality == "rgbd";
    if (is_rgbd && p.stage != "joint")
        throw UsageError("--modality rgbd is only valid with --stage joint");
    const Modality mod = is_rgbd ? Modality::rgb : parse_modality(p.modality);

    if (p.stage == "wsp") {
        StillDataset images = stills_or_keyframes(manifest, mod, Role::train);
        if (images.samples.empty()) throw std::runtime_error("no training images in manifest");
        StillDataset patches = build_patch_dataset(images, p.patch_grid, p.patch_size);
        const int channels = images.samples[0].input.dim(0);
        Model model(build_wsp_cnn({channels, p.patch_size, p.patch_size}, num_classes, p.scale,
                                  p.fc_width),
                    cfg.seed);
        fit_model(model, patches, cfg, &log, "wsp");
        const std::string path = (fs::path(p.out) / ("wsp_" + p.modality + ".ckpt")).string();
        save_cnn_checkpoint(path, model, p.modality, manifest.taxonomy, "wsp");
        report_checkpoint(path);
        return 0;
    }

    if (p.stage == "scratch" || p.stage == "finetune") {
        StillDataset images = stills_or_keyframes(manifest, mod, Role::train);
        if (images.samples.empty()) throw std::runtime_error("no training images in manifest");
        Model model(build_dcnn(images.samples[0].input.shape(), num_classes, p.scale, p.fc_width),
                    cfg.seed);
        if (p.stage == "finetune") {
            if (p.init.size() != 1)
                throw UsageError("--stage finetune requires --init with the wsp-stage checkpoint");
            CnnArtifact art = load_cnn_checkpoint(p.init[0]);
            check_taxonomy(art.taxonomy, manifest.taxonomy, "init checkpoint");
            transfer_conv_weights(art.model, model);
        }
        fit_model(model, images, cfg, &log, p.stage);
        const std::string path =
            (fs::path(p.out) / (p.stage + "_" + p.modality + ".ckpt")).string();
        save_cnn_checkpoint(path, model, p.modality, manifest.taxonomy, p.stage);
        report_checkpoint(path);
        return 0;
    }

    if (p.stage == "temporal") {
        if (p.init.size() != 1)
            throw UsageError(
                "--stage temporal requires --init with the finetune- or scratch-stage checkpoint");
        CnnArtifact art = load_cnn_checkpoint(p.init[0]);
        check_taxonomy(art.taxonomy, manifest.taxonomy, "init checkpoint");
        const std::vector<Sequence> seqs = load_sequences(manifest, Role::train);
        if (seqs.empty()) throw std::runtime_error("manifest has no training sequences");
        int t = p.segment_len > 0 ? p.segment_len : 9;
        const std::vector<SegmentSample> segments = segments_or_t1(seqs, t);
        FeatureSequenceSet feats = extract_segment_features(art.model, "fc5", segments, mod);
        VideoModel vm =
            make_video_model(std::move(art.model), "fc5", p.lstm_hidden, num_classes, cfg.seed);
        fit_temporal(vm, feats, cfg, &log, "temporal");
        const std::string path =
            (fs::path(p.out) / ("temporal_" + p.modality + ".ckpt")).string();
        save_video_checkpoint(path, vm, p.modality, manifest.taxonomy, "temporal", t);
        report_checkpoint(path);
        return 0;
    }

    if (p.stage == "joint" && !is_rgbd) {
        if (p.init.size() != 1)
            throw UsageError("--stage joint requires --init with the temporal-stage checkpoint");
        VideoArtifact art = load_video_checkpoint(p.init[0]);
        check_taxonomy(art.taxonomy, manifest.taxonomy, "init checkpoint");
        const std::vector<Sequence> seqs = load_sequences(manifest, Role::train);
        if (seqs.empty()) throw std::runtime_error("manifest has no training sequences");
        int t = p.segment_len > 0 ? p.segment_len : art.segment_len;
        const std::vector<SegmentSample> segments = segments_or_t1(seqs, t);
        fit_video_joint(art.model, segments, mod, cfg, &log, "joint");
        const std::string path = (fs::path(p.out) / ("joint_" + p.modality + ".ckpt")).string();
        save_video_checkpoint(path, art.model, p.modality, manifest.taxonomy, "joint", t);
        report_checkpoint(path);
        return 0;
    }

    if (p.stage == "joint" && is_rgbd) {
        if (p.init.size() != 2)
            throw UsageError(
                "--stage joint --modality rgbd requires two --init checkpoints (the rgb and depth "
                "temporal stages)");
        VideoArtifact a = load_video_checkpoint(p.init[0]);
        VideoArtifact b = load_video_checkpoint(p.init[1]);
        if (a.modality == "depth" && b.modality == "rgb") std::swap(a, b);
        if (a.modality != "rgb" || b.modality != "depth")
            throw UsageError("--init checkpoints must cover the rgb and depth modalities (got '" +
                             a.modality + "' and '" + b.modality + "')");
        check_taxonomy(a.taxonomy, manifest.taxonomy, "rgb init checkpoint");
        check_taxonomy(b.taxonomy, manifest.taxonomy, "depth init checkpoint");
        const std::vector<Sequence> seqs = load_sequences(manifest, Role::train);
        if (seqs.empty()) throw std::runtime_error("manifest has no training sequences");
        int t = p.segment_len > 0 ? p.segment_len : a.segment_len;
        const std::vector<SegmentSample> segments = segments_or_t1(seqs, t);

        FusedVideoModel fused = make_fused_video_model(std::move(a.model.branch),
                                                       std::move(b.model.branch), p.fusion_hidden,
                                                       num_classes, cfg.seed);
        StillDataset embeddings = fused_embedding_dataset(fused, segments, manifest.taxonomy);
        TrainingConfig head_cfg = cfg;
        head_cfg.epochs = p.head_epochs;
        fit_model(fused.fusion, embeddings, head_cfg, &log, "fusion");
        if (cfg.epochs > 0) fit_fused_joint(fused, segments, cfg, &log, "joint");
        const std::string path = (fs::path(p.out) / "joint_rgbd.ckpt").string();
        save_fused_checkpoint(path, fused, manifest.taxonomy, "joint", t);
        report_checkpoint(path);
        return 0;
    }

    throw UsageError("unknown stage '" + p.stage +
                     "' (expected wsp, finetune, temporal, joint or scratch)");
}

// ---------------------------------------------------------------------------
// eval

struct EvalParams {
    std::string checkpoint;
    std::string manifest;
    std::string aggregate = "none";
    double wsvm_p = -1.0;  // < 0 = no weighted linear head
    int segment_len = 0;   // 0 = from checkpoint
    std::string out;
    std::string config;
};

void print_report(const EvalReport& rep, const std::vector<std::string>& taxonomy,
                  const std::string& out_dir) {
    const std::string text = format_report(rep, taxonomy);
    std::cout << text;
    std::cout << metric_line("eval/mean_class_accuracy", rep.mean_class_accuracy) << "\n";
    if (!out_dir.empty()) {
        std::ofstream f(fs::path(out_dir) / "report.txt", std::ios::trunc);
        f << text << metric_line("eval/mean_class_accuracy", rep.mean_class_accuracy) << "\n";
    }
}

/// Per-sequence prediction by averaging per-frame class posteriors of a
/// per-frame classifier over the keyframes.
EvalReport eval_ave_sequences(const Model& cnn, const std::vector<Sequence>& seqs, Modality mod,
                              int num_classes) {
    std::vector<int> labels, preds;
    for (const Sequence& seq : seqs) {
        const std::vector<Tensor>& frames = mod == Modality::rgb ? seq.rgb : seq.depth;
        if (frames.empty())
            throw std::runtime_error("sequence '" + seq.id + "' has no " + modality_name(mod) +
                                     " frames");
        std::vector<Tensor> probs;
        probs.reserve(frames.size());
        for (const Tensor& f : frames) probs.push_back(softmax(cnn.forward(f)));
        labels.push_back(seq.label);
        preds.push_back(argmax_index(average_predictions(probs)));
    }
    return mean_class_accuracy(preds, labels, num_classes);
}

int run_eval(const EvalParams& p) {
    const Manifest manifest = load_manifest(p.manifest);
    const CheckpointData data = load_checkpoint(p.checkpoint);
    const std::string kind = checkpoint_kind(data);
    if (!p.out.empty()) {
        fs::create_directories(p.out);
        write_config_echo(p.out, {{"command", "eval"},
                                  {"checkpoint", p.checkpoint},
                                  {"manifest", p.manifest},
                                  {"aggregate", p.aggregate},
                                  {"wsvm-p", fmt(p.wsvm_p)},
                                  {"segment-len", std::to_string(p.segment_len)},
                                  {"out", p.out}});
    }
    if (p.aggregate != "none" && p.aggregate != "ave" && p.aggregate != "lstm")
        throw UsageError("unknown --aggregate '" + p.aggregate + "' (expected none, ave or lstm)");
    if (p.wsvm_p >= 0.0 && p.aggregate != "none")
        throw UsageError("--wsvm-p is only supported with --aggregate none");

    if (kind == "cnn") {
        CnnArtifact art = load_cnn_checkpoint_data(data);
        check_taxonomy(art.taxonomy, manifest.taxonomy, "checkpoint");
        const Modality mod = parse_modality(art.modality);
        if (p.wsvm_p >= 0.0) {
            StillDataset train = stills_or_keyframes(manifest, mod, Role::train);
            StillDataset test = stills_or_keyframes(manifest, mod, Role::test);
            if (train.samples.empty() || test.samples.empty())
                throw std::runtime_error("wsvm evaluation needs train and test samples");
            LinearModel lm = fit_wsvm(art.model, "fc5", train, p.wsvm_p);
            print_report(evaluate_linear(art.model, "fc5", lm, test), manifest.taxonomy, p.out);
            return 0;
        }
        if (p.aggregate == "none") {
            StillDataset test = stills_or_keyframes(manifest, mod, Role::test);
            if (test.samples.empty()) throw std::runtime_error("manifest has no test samples");
            print_report(evaluate_stills(art.model, test), manifest.taxonomy, p.out);
            return 0;
        }
        if (p.aggregate == "ave") {
            const std::vector<Sequence> seqs = load_sequences(manifest, Role::test);
            if (seqs.empty()) throw std::runtime_error("manifest has no test sequences");
            print_report(
                eval_ave_sequences(art.model, seqs, mod, static_cast<int>(manifest.taxonomy.size())),
                manifest.taxonomy, p.out);
            return 0;
        }
        throw UsageError("--aggregate lstm needs a video checkpoint (this one is a cnn)");
    }

    if (kind == "video") {
        VideoArtifact art = load_video_checkpoint_data(data);
        check_taxonomy(art.taxonomy, manifest.taxonomy, "checkpoint");
        const Modality mod = parse_modality(art.modality);
        const std::vector<Sequence> seqs = load_sequences(manifest, Role::test);
        if (seqs.empty()) throw std::runtime_error("manifest has no test sequences");
        if (p.aggregate == "ave") {
            print_report(eval_ave_sequences(art.model.branch.cnn, seqs, mod,
                                            static_cast<int>(manifest.taxonomy.size())),
                         manifest.taxonomy, p.out);
            return 0;
        }
        if (p.aggregate == "lstm") {
            int t = p.segment_len > 0 ? p.segment_len : art.segment_len;
            const std::vector<SegmentSample> segments = segments_or_t1(seqs, t);
            print_report(evaluate_video(art.model, segments, mod), manifest.taxonomy, p.out);
            return 0;
        }
        throw UsageError("a video checkpoint needs --aggregate lstm or ave");
    }

    if (kind == "video_fused") {
        FusedArtifact art = load_fused_checkpoint_data(data);
        check_taxonomy(art.taxonomy, manifest.taxonomy, "checkpoint");
        const std::vector<Sequence> seqs = load_sequences(manifest, Role::test);
        if (seqs.empty()) throw std::runtime_error("manifest has no test sequences");
        if (p.aggregate == "ave") {
            const int nc = static_cast<int>(manifest.taxonomy.size());
            std::vector<int> labels, preds;
            for (const Sequence& seq : seqs) {
                if (seq.rgb.empty() || seq.depth.empty())
                    throw std::runtime_error("sequence '" + seq.id + "' lacks a modality");
                std::vector<Tensor> probs;
                for (const Tensor& f : seq.rgb)
                    probs.push_back(softmax(art.model.rgb.cnn.forward(f)));
                for (const Tensor& f : seq.depth)
                    probs.push_back(softmax(art.model.depth.cnn.forward(f)));
                labels.push_back(seq.label);
                preds.push_back(argmax_index(average_predictions(probs)));
            }
            print_report(mean_class_accuracy(preds, labels, nc), manifest.taxonomy, p.out);
            return 0;
        }
        if (p.aggregate == "lstm") {
            int t = p.segment_len > 0 ? p.segment_len : art.segment_len;
            const std::vector<SegmentSample> segments = segments_or_t1(seqs, t);
            print_report(evaluate_fused(art.model, segments), manifest.taxonomy, p.out);
            return 0;
        }
        throw UsageError("a fused checkpoint needs --aggregate lstm or ave");
    }

    throw std::runtime_error("unrecognized checkpoint kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// diag

struct DiagParams {
    std::string checkpoint;
    std::string manifest;
    std::string layer = "conv1";
    std::string modality;  // empty = the checkpoint's own modality
    std::string out;
    std::string config;
};

int run_diag(const DiagParams& p) {
    const CheckpointData data = load_checkpoint(p.checkpoint);
    if (checkpoint_kind(data) != "cnn")
        throw std::runtime_error("diag needs a cnn checkpoint (this one is '" +
                                 checkpoint_kind(data) + "')");
    CnnArtifact art = load_cnn_checkpoint_data(data);
    const Manifest manifest = load_manifest(p.manifest);
    check_taxonomy(art.taxonomy, manifest.taxonomy, "checkpoint");

    if (art.model.layer_index(p.layer) < 0) {
        std::string names;
        for (const std::string& n : art.model.layer_names()) names += " " + n;
        std::cerr << "error: unknown layer '" << p.layer << "'; model layers:" << names << "\n";
        return 2;
    }

    const Modality mod = parse_modality(p.modality.empty() ? art.modality : p.modality);
    StillDataset probe = stills_or_keyframes(manifest, mod, Role::test);
    std::string probe_role = "test";
    if (probe.samples.empty()) {
        std::cerr << "warning: no test samples; probing the train split\n";
        probe = stills_or_keyframes(manifest, mod, Role::train);
        probe_role = "train";
    }
    if (probe.samples.empty()) throw std::runtime_error("manifest has no usable probe samples");
    std::vector<Tensor> inputs;
    inputs.reserve(probe.samples.size());
    for (const StillSample& s : probe.samples) inputs.push_back(s.input);

    fs::create_directories(p.out);
    write_config_echo(p.out, {{"command", "diag"},
                              {"checkpoint", p.checkpoint},
                              {"manifest", p.manifest},
                              {"layer", p.layer},
                              {"modality", modality_name(mod)},
                              {"out", p.out}});

    const std::string dataset_id = p.manifest + " (" + modality_name(mod) + ", " + probe_role + ")";
    ActivationProfile prof;
    try {
        prof = activation_rate(art.model, p.layer, inputs, dataset_id);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    const std::string table = format_activation_table(prof);
    std::cout << table;
    std::ofstream tf(fs::path(p.out) / "activation_profile.txt", std::ios::trunc);
    if (!tf) throw std::runtime_error("cannot write activation_profile.txt");
    tf << table;

    const std::string grid_path = (fs::path(p.out) / ("filters_" + p.layer + ".ppm")).string();
    export_filter_grid(art.model, p.layer, grid_path);
    std::cout << "filter_grid\t" << grid_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Depth-CNN scene recognition toolkit"};
    app.require_subcommand(1);

    GenParams gen;
    TrainParams train;
    EvalParams eval;
    DiagParams diag;

    auto scalar = [](CLI::Option* o) { o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast); };

    CLI::App* g = app.add_subcommand("gen-data", "Generate the synthetic RGB-D corpus");
    scalar(g->add_option("--classes", gen.classes, "Scene classes")->check(CLI::Range(2, 64)));
    scalar(g->add_option("--per-class", gen.per_class, "Still images per class")
               ->check(CLI::Range(1, 100000)));
    scalar(g->add_option("--videos-per-class", gen.videos_per_class, "Videos per class")
               ->check(CLI::Range(0, 100000)));
    scalar(g->add_option("--video-frames", gen.video_frames, "Raw frames per video")
               ->check(CLI::Range(2, 100000)));
    scalar(g->add_option("--size", gen.size, "Image width and height")->check(CLI::Range(16, 512)));
    scalar(g->add_option("--sensor-range", gen.sensor_range, "Depth sensor range (<=0: unlimited)"));
    scalar(g->add_option("--test-fraction", gen.test_fraction, "Held-out fraction")
               ->check(CLI::Range(0.0, 0.9)));
    scalar(g->add_option("--seed", gen.seed, "Random seed"));
    scalar(g->add_option("--out", gen.out, "Output directory")->required());
    scalar(g->add_option("--config", gen.config, "key=value config file"));

    CLI::App* t = app.add_subcommand("train", "Train a pipeline stage");
    scalar(t->add_option("--stage", train.stage, "wsp | finetune | temporal | joint | scratch")
               ->required()
               ->check(CLI::IsMember({"wsp", "finetune", "temporal", "joint", "scratch"})));
    scalar(t->add_option("--modality", train.modality, "rgb | depth | rgbd")
               ->check(CLI::IsMember({"rgb", "depth", "rgbd"})));
    scalar(t->add_option("--manifest", train.manifest, "Dataset manifest")->required());
    scalar(t->add_option("--out", train.out, "Output directory")->required());
    t->add_option("--init", train.init, "Checkpoint(s) from the prior stage");
    scalar(t->add_option("--learning-rate", train.learning_rate, "SGD learning rate"));
    scalar(t->add_option("--momentum", train.momentum, "SGD momentum"));
    scalar(t->add_option("--weight-decay", train.weight_decay, "L2 weight decay"));
    scalar(t->add_option("--batch-size", train.batch_size, "Mini-batch size"));
    scalar(t->add_option("--epochs", train.epochs, "Training epochs")->check(CLI::Range(0, 100000)));
    scalar(t->add_option("--seed", train.seed, "Random seed"));
    scalar(t->add_option("--scale", train.scale, "Channel width scale"));
    scalar(t->add_option("--fc-width", train.fc_width, "fc5 width (0: scale default)"));
    scalar(t->add_option("--patch-grid", train.patch_grid, "Patch grid g (g x g patches)"));
    scalar(t->add_option("--patch-size", train.patch_size, "Patch side length"));
    scalar(t->add_option("--segment-len", train.segment_len, "Keyframes per segment T"));
    scalar(t->add_option("--lstm-hidden", train.lstm_hidden, "Recurrent state width"));
    scalar(t->add_option("--fusion-hidden", train.fusion_hidden, "Fusion head hidden width"));
    scalar(t->add_option("--head-epochs", train.head_epochs, "Fusion head warm-up epochs"));
    t->add_option("--freeze", train.freeze, "Layer/parameter prefixes to freeze");
    scalar(t->add_option("--config", train.config, "key=value config file"));

    CLI::App* e = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
    scalar(e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required());
    scalar(e->add_option("--manifest", eval.manifest, "Dataset manifest")->required());
    scalar(e->add_option("--aggregate", eval.aggregate, "none | ave | lstm"));
    scalar(e->add_option("--wsvm-p", eval.wsvm_p, "Class-weight exponent for a retrained linear head"));
    scalar(e->add_option("--segment-len", eval.segment_len, "Segment length override"));
    scalar(e->add_option("--out", eval.out, "Optional report directory"));
    scalar(e->add_option("--config", eval.config, "key=value config file"));

    CLI::App* d = app.add_subcommand("diag", "Activation profile and filter grid");
    scalar(d->add_option("--checkpoint", diag.checkpoint, "Checkpoint file")->required());
    scalar(d->add_option("--manifest", diag.manifest, "Dataset manifest")->required());
    scalar(d->add_option("--layer", diag.layer, "Conv layer to profile"));
    scalar(d->add_option("--modality", diag.modality, "Probe modality (default: checkpoint's)")
               ->check(CLI::IsMember({"rgb", "depth"})));
    scalar(d->add_option("--out", diag.out, "Output directory")->required());
    scalar(d->add_option("--config", diag.config, "key=value config file"));

    std::vector<std::string> args;
    try {
        args = expand_args(argc, argv);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }

    try {
        // CLI11 parses reversed argument vectors in place.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex);
        return code == 0 ? 0 : 2;
    }

    try {
        if (g->parsed()) return run_gen_data(gen);
        if (t->parsed()) return run_train(train);
        if (e->parsed()) return run_eval(eval);
        if (d->parsed()) return run_diag(diag);
        std::cerr << "error: no command given\n";
        return 2;
    } catch (const UsageError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
