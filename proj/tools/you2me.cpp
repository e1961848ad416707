#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "you2me/blob.hpp"
#include "you2me/evaluation.hpp"
#include "you2me/synthdata.hpp"

namespace {

using namespace you2me;

HeadKind head_from_string(const std::string& s) {
    if (s == "upper") return HeadKind::Upper;
    if (s == "lower") return HeadKind::Lower;
    if (s == "single") return HeadKind::Single;
    throw ConfigMismatch("unknown head: " + s);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw IoFailure("cannot write " + tmp.string());
        f << text;
    }
    std::filesystem::rename(tmp, path);
}

struct TrainCliOpts {
    std::string dataset, codebook, out, head = "upper", substitution = "true_detector";
    std::string resume;
    TrainConfig tcfg;
    int embed_dim = 256, hidden_dim = 512;
    std::uint64_t sub_seed = 0;
    bool no_scene = false, no_second_person = false, regression = false;
};

void add_train_flags(CLI::App* cmd, TrainCliOpts& o) {
    cmd->add_option("--dataset", o.dataset, "dataset manifest path")->required();
    cmd->add_option("--codebook", o.codebook, "codebook directory")->required();
    cmd->add_option("--head", o.head, "upper|lower|single");
    cmd->add_option("--epochs", o.tcfg.epochs);
    cmd->add_option("--batch", o.tcfg.batch_size);
    cmd->add_option("--seed", o.tcfg.seed);
    cmd->add_option("--window", o.tcfg.window_len);
    cmd->add_option("--overlap", o.tcfg.window_overlap);
    cmd->add_option("--lr", o.tcfg.lr_phase1);
    cmd->add_option("--lr2", o.tcfg.lr_phase2);
    cmd->add_option("--lr-switch-epoch", o.tcfg.lr_switch_epoch);
    cmd->add_option("--ar-from", o.tcfg.autoregressive_from_epoch,
                    "epoch from which previous-pose inputs are model predictions");
    cmd->add_option("--embed", o.embed_dim);
    cmd->add_option("--hidden", o.hidden_dim);
    cmd->add_option("--substitution", o.substitution,
                    "true_detector|gt_3d|still|zero|random|predicted_3d_file");
    cmd->add_option("--sub-seed", o.sub_seed);
    cmd->add_flag("--no-scene", o.no_scene, "ablate the scene feature");
    cmd->add_flag("--no-second-person", o.no_second_person,
                  "ablate the second-person feature");
    cmd->add_flag("--regression", o.regression, "regression head variant");
}

std::pair<ModelConfig, SubstitutionConfig> train_configs(const TrainCliOpts& o) {
    ModelConfig mcfg;
    mcfg.embed_dim = o.embed_dim;
    mcfg.hidden_dim = o.hidden_dim;
    mcfg.num_classes = 1;  // set by train_head from the codebook
    mcfg.use_scene = !o.no_scene;
    mcfg.use_second_person = !o.no_second_person;
    if (o.regression) mcfg.head = Head::Regression;
    SubstitutionConfig sub;
    sub.mode = substitution_mode_from_string(o.substitution);
    sub.seed = o.sub_seed;
    return {mcfg, sub};
}

int run_train(const TrainCliOpts& o) {
    const Dataset ds = load_dataset(o.dataset);
    const PoseCodebook cb = load_codebook(o.codebook);
    auto [mcfg, sub] = train_configs(o);
    Checkpoint<float> resume;
    const Checkpoint<float>* resume_ptr = nullptr;
    if (!o.resume.empty()) {
        resume = load_checkpoint<float>(o.resume);
        resume_ptr = &resume;
    }
    const auto out = train_head(ds, cb, head_from_string(o.head), mcfg, o.tcfg, sub, o.out,
                                resume_ptr);
    std::cout << "trained " << o.head << " head: epochs=" << out.checkpoint.epoch
              << " teacher-forced accuracy=" << out.final_epoch_accuracy << "\n";
    return 0;
}

int run_infer(const std::string& dataset, const std::string& codebook,
              const std::string& ckpt_upper, const std::string& ckpt_lower,
              const std::string& split, const std::string& out_dir,
              const std::string& substitution, std::uint64_t sub_seed) {
    const Dataset ds = load_dataset(dataset);
    const PoseCodebook cb = load_codebook(codebook);
    Checkpoint<float> up = load_checkpoint<float>(ckpt_upper);
    Checkpoint<float> low;
    const bool has_lower = !ckpt_lower.empty();
    if (has_lower) low = load_checkpoint<float>(ckpt_lower);
    if (cb.single_mode == has_lower)
        throw ConfigMismatch("checkpoint count does not match codebook mode");
    SubstitutionConfig sub;
    sub.mode = substitution_mode_from_string(substitution);
    sub.seed = sub_seed;

    std::filesystem::create_directories(out_dir);
    for (int si : ds.split_indices(split)) {
        const auto& rec = ds.sequences[si];
        std::vector<StepInput<float>> seq(rec.frames());
        const MatX<float> o_channel = substituted_second_person(ds, si, sub);
        for (Eigen::Index t = 0; t < rec.frames(); ++t) {
            seq[t].motion = motion_window_at(rec.homographies, static_cast<int>(t)).cast<float>();
            seq[t].second_person = o_channel.row(t).transpose();
            seq[t].scene = rec.scene.row(t).transpose();
        }
        const SequenceOutput u = forward_sequence(seq, up.params, DecodeMode::Autoregressive);
        SequenceOutput l;
        if (has_lower) l = forward_sequence(seq, low.params, DecodeMode::Autoregressive);

        std::ostringstream csv;
        csv << "frame,upper_id,lower_id\n";
        MatX<float> skels(rec.frames(), 3 * ds.layout.joint_count());
        for (Eigen::Index t = 0; t < rec.frames(); ++t) {
            const ClusterPair pair{u.predicted[t], has_lower ? l.predicted[t] : 0};
            csv << t << "," << pair.upper_id << "," << pair.lower_id << "\n";
            const Skeleton3D sk = reconstruct(pair, cb);
            for (int j = 0; j < ds.layout.joint_count(); ++j)
                skels.row(t).segment<3>(3 * j) = sk.row(j).cast<float>();
        }
        write_text(std::filesystem::path(out_dir) / (rec.id + "_clusters.csv"), csv.str());
        write_blob(std::filesystem::path(out_dir) / (rec.id + "_skeletons.y2m"), skels);
    }
    std::cout << "wrote predictions to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"You2Me egocentric pose pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset bundle");
    std::string synth_config, synth_out;
    std::uint64_t synth_seed = 0;
    bool synth_seed_set = false;
    synth->add_option("--config", synth_config, "SynthConfig JSON file");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_seed)->each([&](const std::string&) {
        synth_seed_set = true;
    });

    // build-codebook
    auto* bcb = app.add_subcommand("build-codebook", "fit the mixed-granularity codebooks");
    std::string bcb_dataset, bcb_out;
    int k_upper = you2me::kDefaultUpperClusters, k_lower = you2me::kDefaultLowerClusters;
    int k_single = you2me::kDefaultSingleClusters;
    std::uint64_t bcb_seed = 0;
    bool bcb_single = false;
    bcb->add_option("--dataset", bcb_dataset)->required();
    bcb->add_option("--out", bcb_out)->required();
    bcb->add_option("--k-upper", k_upper);
    bcb->add_option("--k-lower", k_lower);
    bcb->add_option("--k", k_single, "cluster count in single mode");
    bcb->add_option("--seed", bcb_seed);
    bcb->add_flag("--single", bcb_single, "one full-body codebook");

    // train
    auto* train_cmd = app.add_subcommand("train", "train one classifier head");
    TrainCliOpts topt;
    add_train_flags(train_cmd, topt);
    train_cmd->add_option("--out", topt.out, "checkpoint/loss-curve directory")->required();
    train_cmd->add_option("--resume", topt.resume, "checkpoint to resume from");

    // infer
    auto* infer = app.add_subcommand("infer", "autoregressive decoding to cluster ids");
    std::string inf_dataset, inf_codebook, inf_up, inf_low, inf_split = "test", inf_out;
    std::string inf_sub = "true_detector";
    std::uint64_t inf_sub_seed = 0;
    infer->add_option("--dataset", inf_dataset)->required();
    infer->add_option("--codebook", inf_codebook)->required();
    infer->add_option("--checkpoint", inf_up, "upper (or single) checkpoint")->required();
    infer->add_option("--checkpoint-lower", inf_low);
    infer->add_option("--split", inf_split);
    infer->add_option("--substitution", inf_sub);
    infer->add_option("--sub-seed", inf_sub_seed);
    infer->add_option("--out", inf_out)->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "metric report on a split");
    std::string ev_dataset, ev_codebook, ev_up, ev_low, ev_split = "test", ev_out;
    std::string ev_sub = "true_detector", ev_baseline;
    std::uint64_t ev_sub_seed = 0;
    eval_cmd->add_option("--dataset", ev_dataset)->required();
    eval_cmd->add_option("--codebook", ev_codebook)->required();
    eval_cmd->add_option("--checkpoint", ev_up, "upper (or single) checkpoint");
    eval_cmd->add_option("--checkpoint-lower", ev_low);
    eval_cmd->add_option("--baseline", ev_baseline, "stand|sit constant baseline");
    eval_cmd->add_option("--split", ev_split);
    eval_cmd->add_option("--substitution", ev_sub);
    eval_cmd->add_option("--sub-seed", ev_sub_seed);
    eval_cmd->add_option("--out", ev_out, "directory for report.csv");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train and evaluate the feature ablations");
    TrainCliOpts aopt;
    add_train_flags(ablate, aopt);
    ablate->add_option("--out", aopt.out, "report directory")->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::uint64_t gc_seed = 7;
    gc->add_option("--seed", gc_seed);

    // quantstats
    auto* qs = app.add_subcommand("quantstats", "codebook quantization statistics");
    std::string qs_dataset, qs_codebook, qs_split = "train";
    qs->add_option("--dataset", qs_dataset)->required();
    qs->add_option("--codebook", qs_codebook)->required();
    qs->add_option("--split", qs_split);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        using namespace you2me;
        if (synth->parsed()) {
            SynthConfig cfg;
            if (!synth_config.empty()) cfg = synth_config_from_json_file(synth_config);
            if (synth_seed_set) cfg.seed = synth_seed;
            const auto manifest = generate(cfg, synth_out);
            std::cout << "wrote " << manifest.string() << "\n";
        } else if (bcb->parsed()) {
            const Dataset ds = load_dataset(bcb_dataset);
            const auto poses = normalized_poses(ds, "train");
            const PoseCodebook cb =
                bcb_single ? build_codebook_single(poses, ds.layout, k_single, bcb_seed)
                           : build_codebook(poses, ds.layout, k_upper, k_lower, bcb_seed);
            save_codebook(bcb_out, cb);
            std::cout << "wrote codebook to " << bcb_out << "\n";
        } else if (train_cmd->parsed()) {
            return run_train(topt);
        } else if (infer->parsed()) {
            return run_infer(inf_dataset, inf_codebook, inf_up, inf_low, inf_split, inf_out,
                             inf_sub, inf_sub_seed);
        } else if (eval_cmd->parsed()) {
            const Dataset ds = load_dataset(ev_dataset);
            const PoseCodebook cb = load_codebook(ev_codebook);
            EvalReport rep;
            if (!ev_baseline.empty()) {
                const Posture tag = ev_baseline == "stand" ? Posture::Stand : Posture::Sit;
                rep = evaluate_constant(baseline_constant(ds, tag), ds, ev_split, cb);
            } else {
                if (ev_up.empty())
                    throw CLI::RequiredError("--checkpoint (or --baseline)");
                Checkpoint<float> up = load_checkpoint<float>(ev_up);
                Checkpoint<float> low;
                ModelParams<float>* low_ptr = nullptr;
                if (!ev_low.empty()) {
                    low = load_checkpoint<float>(ev_low);
                    low_ptr = &low.params;
                }
                SubstitutionConfig sub;
                sub.mode = substitution_mode_from_string(ev_sub);
                sub.seed = ev_sub_seed;
                rep = evaluate(up.params, low_ptr, ds, ev_split, cb, sub);
            }
            std::cout << rep.to_table();
            if (!ev_out.empty()) {
                std::filesystem::create_directories(ev_out);
                write_text(std::filesystem::path(ev_out) / "report.csv", rep.to_csv());
            }
        } else if (ablate->parsed()) {
            const Dataset ds = load_dataset(aopt.dataset);
            const PoseCodebook cb = load_codebook(aopt.codebook);
            auto [mcfg, sub] = train_configs(aopt);
            (void)sub;
            const auto results = run_ablations(ds, cb, mcfg, mcfg, aopt.tcfg);
            std::filesystem::create_directories(aopt.out);
            for (const auto& r : results) {
                std::cout << "== " << r.name << " ==\n" << r.report.to_table() << "\n";
                write_text(std::filesystem::path(aopt.out) / (r.name + "_report.csv"),
                           r.report.to_csv());
            }
        } else if (gc->parsed()) {
            ModelConfig cfg;
            cfg.embed_dim = 4;
            cfg.hidden_dim = 6;
            cfg.num_layers = 2;
            cfg.num_classes = 5;
            const GradCheckReport cls = gradient_check(cfg, gc_seed);
            cfg.head = Head::Regression;
            cfg.regression_output_dim = 9;
            const GradCheckReport reg = gradient_check(cfg, gc_seed + 1);
            std::cout << "classification max rel err " << cls.max_rel_error << " ("
                      << cls.worst_tensor << ")\n";
            std::cout << "regression     max rel err " << reg.max_rel_error << " ("
                      << reg.worst_tensor << ")\n";
            if (cls.max_rel_error >= 1e-4 || reg.max_rel_error >= 1e-4) {
                std::cerr << "gradient check FAILED\n";
                return 1;
            }
        } else if (qs->parsed()) {
            const Dataset ds = load_dataset(qs_dataset);
            const PoseCodebook cb = load_codebook(qs_codebook);
            const auto st = quantization_stats(normalized_poses(ds, qs_split), cb);
            std::cout << "mean per-joint distance: " << st.mean_per_joint_cm << " cm\n"
                      << "mean per-pose distance:  " << st.mean_per_pose_cm << " cm\n"
                      << "histogram (0.5 cm bins):";
            for (long h : st.histogram) std::cout << " " << h;
            std::cout << "\n";
        }
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
