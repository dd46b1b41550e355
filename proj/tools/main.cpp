#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "bvae/checkpoint.hpp"
#include "bvae/data.hpp"
#include "bvae/eval.hpp"
#include "bvae/latent_ops.hpp"
#include "bvae/plot.hpp"
#include "bvae/run_config.hpp"
#include "bvae/training.hpp"
#include "bvae/verify.hpp"

namespace fs = std::filesystem;
using namespace bvae;

namespace {

std::uint64_t file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), {});
    return fnv1a64(bytes.data(), bytes.size());
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Output root: --out wins, then $BVAE_OUT_ROOT/<leaf>, then runs/<leaf>.
fs::path resolve_out(const std::string& out_flag, const std::string& leaf) {
    if (!out_flag.empty()) return out_flag;
    const char* root = std::getenv("BVAE_OUT_ROOT");
    return fs::path(root ? root : "runs") / leaf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_metadata(const fs::path& dir, nlohmann::json meta) {
    write_text(dir / "metadata.json", meta.dump(2) + "\n");
}

std::array<int, 3> parse_dims(const std::vector<int>& dims) {
    if (dims.size() == 1) return {dims[0], dims[0], dims[0]};
    if (dims.size() == 3) return {dims[0], dims[1], dims[2]};
    throw CLI::ValidationError("--dims expects one value or three");
}

struct LoadedModel {
    Checkpoint ckpt;
    EncoderNet encoder;
    DecoderNet decoder;
};

LoadedModel load_model(const fs::path& path) {
    Checkpoint ckpt = load_checkpoint(path);
    EncoderNet encoder(ckpt.config);
    restore_params(encoder.params(), ckpt.section("encoder"));
    DecoderNet decoder(ckpt.config, ckpt.config.seed);
    restore_params(decoder.params(), ckpt.section("decoder"));
    return {std::move(ckpt), std::move(encoder), std::move(decoder)};
}

void save_stage1(const fs::path& dir, const Stage1Model& model,
                 const StageConfig& sc, const TrainingCurve& curve,
                 std::uint64_t dataset_checksum) {
    Checkpoint ckpt;
    ckpt.stage_tag = "stage1_beta" + std::to_string(sc.beta);
    ckpt.epoch = sc.epochs;
    ckpt.seed = sc.seed;
    ckpt.beta = sc.beta;
    ckpt.config = model.encoder.config();
    ckpt.extra = {{"stage_config", sc},
                  {"dataset_checksum", hex64(dataset_checksum)},
                  {"optimizer", "adam"},
                  {"encoder_hash", hex64(params_hash(model.encoder.params()))},
                  {"decoder_hash", hex64(params_hash(model.decoder.params()))}};
    ckpt.sections.emplace_back("encoder", snapshot_params(model.encoder.params()));
    ckpt.sections.emplace_back("decoder", snapshot_params(model.decoder.params()));
    save_checkpoint(ckpt, dir / "checkpoint");
    write_text(dir / "curve.csv", curve_csv(curve));
}

void run_train_stage1(const fs::path& data_dir, const fs::path& out_dir,
                      RunConfig cfg, bool large_beta) {
    const TripletDataset ds = load_dataset(data_dir);
    cfg.model.input_shape = ds.dims;
    cfg.model.validate();
    const StageConfig& sc = large_beta ? cfg.stage1_large : cfg.stage1_small;

    fs::create_directories(out_dir);
    write_run_config(cfg, out_dir / "run_config.json");

    Stage1Model model(cfg.model);
    const auto grids = flatten_dataset(ds);
    const TrainingCurve curve = train_stage1(model, grids, sc);
    const auto dataset_sum = file_checksum(data_dir / "manifest.json");
    save_stage1(out_dir, model, sc, curve, dataset_sum);
    write_metadata(out_dir, {{"command", "train-stage1"},
                             {"config_hash", config_hash_hex(cfg)},
                             {"dataset", data_dir.string()},
                             {"dataset_checksum", hex64(dataset_sum)},
                             {"beta", sc.beta},
                             {"final_dice_loss", curve.epochs.back().dice_loss},
                             {"final_kld", curve.epochs.back().kld}});
    std::printf("stage 1 (beta=%g): %d epochs, final dice loss %.4f, final KLD %.4f\n",
                sc.beta, sc.epochs, curve.epochs.back().dice_loss,
                curve.epochs.back().kld);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage beta-VAE training and voxel shape completion toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path,
                   "JSON run-config document overriding built-in defaults");
    auto effective_config = [&]() {
        return config_path.empty() ? RunConfig{} : load_run_config(config_path);
    };

    // ---- gen-data ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic skull-triplet dataset");
    int gen_n = 30;
    std::vector<int> gen_dims{32};
    std::uint64_t gen_seed = 7;
    std::string gen_out;
    gen->add_option("--n", gen_n, "number of subjects")->check(CLI::PositiveNumber);
    gen->add_option("--dims", gen_dims, "grid dims (one value or z,y,x)")->delimiter(',');
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory");
    gen->callback([&] {
        RunConfig cfg = effective_config();
        cfg.data_n = gen_n;
        cfg.data_dims = parse_dims(gen_dims);
        cfg.data_seed = gen_seed;
        const fs::path out = resolve_out(gen_out, "dataset_" + config_hash_hex(cfg));
        const auto ds = generate_synthetic_triplets(cfg.data_n, cfg.data_dims, cfg.data_seed);
        save_dataset(ds, out);
        write_run_config(cfg, out / "run_config.json");
        std::printf("wrote %d subjects to %s (manifest checksum %s)\n", cfg.data_n,
                    out.string().c_str(),
                    hex64(file_checksum(out / "manifest.json")).c_str());
    });

    // ---- train-stage1 ------------------------------------------------------
    auto* t1 = app.add_subcommand("train-stage1", "joint VAE training (beta-weighted ELBO)");
    std::string t1_data, t1_out;
    double t1_beta = 100.0;
    int t1_epochs = -1, t1_batch = -1;
    double t1_lr = -1.0, t1_recon_scale = -1.0;
    std::uint64_t t1_seed = 0;
    bool t1_seed_set = false, t1_nondet = false;
    int t1_latent = -1, t1_layers = -1, t1_base = -1;
    std::uint64_t t1_model_seed = 0;
    bool t1_model_seed_set = false;
    t1->add_option("--data", t1_data, "dataset directory")->required();
    t1->add_option("--out", t1_out, "run directory");
    t1->add_option("--beta", t1_beta, "KLD weight (100 for stage 1, 0.0001 for the comparator)");
    t1->add_option("--epochs", t1_epochs, "training epochs")->check(CLI::PositiveNumber);
    t1->add_option("--batch", t1_batch, "batch size")->check(CLI::PositiveNumber);
    t1->add_option("--lr", t1_lr, "learning rate");
    t1->add_option("--recon-scale", t1_recon_scale, "dice term weight in the objective");
    t1->add_option("--seed", t1_seed, "training seed")
        ->each([&](const std::string&) { t1_seed_set = true; });
    t1->add_flag("--non-deterministic", t1_nondet, "record real wall-clock seconds");
    t1->add_option("--latent", t1_latent, "latent dimension d");
    t1->add_option("--layers", t1_layers, "conv layer count");
    t1->add_option("--base-channels", t1_base, "first conv width");
    t1->add_option("--model-seed", t1_model_seed, "parameter init seed")
        ->each([&](const std::string&) { t1_model_seed_set = true; });
    t1->callback([&] {
        RunConfig cfg = effective_config();
        const bool large = t1_beta >= 1.0;
        StageConfig& sc = large ? cfg.stage1_large : cfg.stage1_small;
        sc.beta = t1_beta;
        if (t1_epochs > 0) sc.epochs = t1_epochs;
        if (t1_batch > 0) sc.batch_size = t1_batch;
        if (t1_lr > 0) sc.learning_rate = t1_lr;
        if (t1_recon_scale > 0) sc.recon_loss_scale = t1_recon_scale;
        if (t1_seed_set) sc.seed = t1_seed;
        if (t1_nondet) {
            sc.deterministic = false;
            cfg.deterministic = false;
        }
        if (t1_latent > 0) cfg.model.latent_dim = t1_latent;
        if (t1_layers > 0) cfg.model.num_layers = t1_layers;
        if (t1_base > 0) cfg.model.base_channels = t1_base;
        if (t1_model_seed_set) cfg.model.seed = t1_model_seed;
        const fs::path out =
            resolve_out(t1_out, std::string("stage1_") + (large ? "large_" : "small_") +
                                    config_hash_hex(cfg));
        run_train_stage1(t1_data, out, cfg, large);
    });

    // ---- train-stage2 ------------------------------------------------------
    auto* t2 = app.add_subcommand("train-stage2",
                                  "decoupled decoder on frozen stage-1 samples");
    std::string t2_stage1, t2_data, t2_out;
    int t2_epochs = -1, t2_batch = -1;
    double t2_lr = -1.0, t2_recon_scale = -1.0;
    std::uint64_t t2_seed = 0;
    bool t2_seed_set = false;
    t2->add_option("--stage1", t2_stage1, "stage-1 checkpoint path (without .json)")->required();
    t2->add_option("--data", t2_data, "dataset directory")->required();
    t2->add_option("--out", t2_out, "run directory");
    t2->add_option("--epochs", t2_epochs, "training epochs")->check(CLI::PositiveNumber);
    t2->add_option("--batch", t2_batch, "batch size")->check(CLI::PositiveNumber);
    t2->add_option("--lr", t2_lr, "learning rate");
    t2->add_option("--recon-scale", t2_recon_scale, "dice term weight");
    t2->add_option("--seed", t2_seed, "training + decoder init seed")
        ->each([&](const std::string&) { t2_seed_set = true; });
    t2->callback([&] {
        RunConfig cfg = effective_config();
        StageConfig& sc = cfg.stage2;
        if (t2_epochs > 0) sc.epochs = t2_epochs;
        if (t2_batch > 0) sc.batch_size = t2_batch;
        if (t2_lr > 0) sc.learning_rate = t2_lr;
        if (t2_recon_scale > 0) sc.recon_loss_scale = t2_recon_scale;
        if (t2_seed_set) sc.seed = t2_seed;

        const TripletDataset ds = load_dataset(t2_data);
        LoadedModel stage1 = load_model(t2_stage1);
        Stage1Model model(stage1.ckpt.config);
        restore_params(model.encoder.params(), stage1.ckpt.section("encoder"));
        restore_params(model.decoder.params(), stage1.ckpt.section("decoder"));
        const auto stage1_hash_before = params_hash(model.encoder.params());

        DecoderNet decoder =
            clone_decoder_architecture(stage1.ckpt.config, mix_seed(sc.seed, 0xdec2));
        const auto grids = flatten_dataset(ds);
        const TrainingCurve curve = train_stage2(model, decoder, grids, sc);

        const fs::path out = resolve_out(t2_out, "stage2_" + config_hash_hex(cfg));
        fs::create_directories(out);
        write_run_config(cfg, out / "run_config.json");
        Checkpoint ckpt;
        ckpt.stage_tag = "stage2_decoder";
        ckpt.epoch = sc.epochs;
        ckpt.seed = sc.seed;
        ckpt.beta = 0.0;
        ckpt.config = stage1.ckpt.config;
        ckpt.extra = {{"stage_config", sc},
                      {"stage1_checkpoint", t2_stage1},
                      {"stage1_encoder_hash", hex64(stage1_hash_before)},
                      {"decoder_hash", hex64(params_hash(decoder.params()))}};
        ckpt.sections.emplace_back("decoder", snapshot_params(decoder.params()));
        save_checkpoint(ckpt, out / "checkpoint");
        write_text(out / "curve.csv", curve_csv(curve));
        write_metadata(out, {{"command", "train-stage2"},
                             {"config_hash", config_hash_hex(cfg)},
                             {"stage1_unchanged",
                              params_hash(model.encoder.params()) == stage1_hash_before},
                             {"final_dice_loss", curve.epochs.back().dice_loss}});
        std::printf("stage 2: %d epochs, final dice loss %.4f\n", sc.epochs,
                    curve.epochs.back().dice_loss);
    });

    // ---- aggregate ---------------------------------------------------------
    auto* ag = app.add_subcommand("aggregate",
                                  "compose the stage-1 posterior with the stage-2 decoder");
    std::string ag_stage1, ag_stage2, ag_out;
    ag->add_option("--stage1", ag_stage1, "stage-1 checkpoint path")->required();
    ag->add_option("--stage2", ag_stage2, "stage-2 checkpoint path")->required();
    ag->add_option("--out", ag_out, "output directory");
    ag->callback([&] {
        const Checkpoint c1 = load_checkpoint(ag_stage1);
        const Checkpoint c2 = load_checkpoint(ag_stage2);
        if (c1.config.latent_dim != c2.config.latent_dim)
            throw std::runtime_error("aggregate: latent dims differ (" +
                                     std::to_string(c1.config.latent_dim) + " vs " +
                                     std::to_string(c2.config.latent_dim) + ")");
        if (c1.config.input_shape != c2.config.input_shape)
            throw std::runtime_error("aggregate: input shapes differ");

        Stage1Model stage1(c1.config);
        restore_params(stage1.encoder.params(), c1.section("encoder"));
        restore_params(stage1.decoder.params(), c1.section("decoder"));
        DecoderNet decoder(c2.config, c2.config.seed);
        restore_params(decoder.params(), c2.section("decoder"));
        const AggregatedModel agg = aggregate(stage1, decoder);

        const fs::path out = resolve_out(ag_out, "aggregated");
        fs::create_directories(out);
        Checkpoint ckpt;
        ckpt.stage_tag = "aggregated";
        ckpt.epoch = c2.epoch;
        ckpt.seed = c1.seed;
        ckpt.beta = c1.beta;
        ckpt.config = c1.config;
        ckpt.extra = {{"stage1_checkpoint", ag_stage1},
                      {"stage2_checkpoint", ag_stage2},
                      {"stage1_id", agg.stage1_id},
                      {"stage2_id", agg.stage2_id}};
        ckpt.sections.emplace_back("encoder", snapshot_params(agg.encoder.params()));
        ckpt.sections.emplace_back("decoder", snapshot_params(agg.decoder.params()));
        save_checkpoint(ckpt, out / "checkpoint");
        write_metadata(out, {{"command", "aggregate"},
                             {"stage1_id", agg.stage1_id},
                             {"stage2_id", agg.stage2_id}});
        std::printf("aggregated model written to %s (stage1 %s, stage2 %s)\n",
                    out.string().c_str(), agg.stage1_id.c_str(), agg.stage2_id.c_str());
    });

    // ---- verify-math -------------------------------------------------------
    auto* vm = app.add_subcommand("verify-math",
                                  "closed-form vs oracle checks for the KLD math");
    std::string vm_report, vm_out;
    std::uint64_t vm_seed = 42;
    int vm_trials = 100;
    std::int64_t vm_samples = 100000;
    vm->add_option("--report", vm_report, "write the pass/fail table to this file");
    vm->add_option("--out", vm_out, "directory for GD trace CSVs");
    vm->add_option("--seed", vm_seed, "check seed");
    vm->add_option("--trials", vm_trials, "random trials per check")->check(CLI::PositiveNumber);
    vm->add_option("--mc-samples", vm_samples, "Monte Carlo samples")->check(CLI::PositiveNumber);
    vm->callback([&] {
        MathCheckOptions opt;
        opt.seed = vm_seed;
        opt.gradient_trials = vm_trials;
        opt.growth_trials = std::max(10, vm_trials / 2);
        opt.kld_mc_trials = std::max(10, vm_trials / 2);
        opt.mc_samples = vm_samples;
        const VerifyReport report = run_math_checks(opt);
        const std::string table = report.table();
        std::fputs(table.c_str(), stdout);
        if (!vm_report.empty()) write_text(vm_report, table);
        const fs::path out = resolve_out(vm_out, "verify_math");
        fs::create_directories(out);
        for (const auto& [name, csv] : verify_trace_csvs(vm_seed))
            write_text(out / (name + ".csv"), csv);
        if (!report.all_pass()) throw std::runtime_error("verify-math: checks failed");
    });

    // ---- reconstruct -------------------------------------------------------
    auto* rc = app.add_subcommand("reconstruct",
                                  "deterministic reconstruction of every grid");
    std::string rc_model, rc_data, rc_out, rc_subject;
    rc->add_option("--model", rc_model, "checkpoint path")->required();
    rc->add_option("--data", rc_data, "dataset directory")->required();
    rc->add_option("--out", rc_out, "output directory");
    rc->add_option("--subject", rc_subject, "restrict to one subject id");
    rc->callback([&] {
        const LoadedModel model = load_model(rc_model);
        const TripletDataset ds = load_dataset(rc_data);
        const fs::path out = resolve_out(rc_out, "reconstruct");
        for (const SkullTriplet& t : ds.triplets) {
            if (!rc_subject.empty() && t.subject_id != rc_subject) continue;
            const fs::path dir = out / t.subject_id;
            fs::create_directories(dir);
            std::vector<VoxelGrid> recons;
            recons.reserve(3);
            for (SkullClass c :
                 {SkullClass::complete, SkullClass::cranial, SkullClass::facial}) {
                recons.push_back(reconstruct(model.encoder, model.decoder, t.grid(c)));
                save_voxel_file(recons.back(),
                                dir / (std::string(to_string(c)) + "_recon.vox"));
            }
            std::vector<const VoxelGrid*> panels{&t.complete,       &recons[0],
                                                 &t.cranial_defect, &recons[1],
                                                 &t.facial_defect,  &recons[2]};
            write_png(slice_montage_image(panels), dir / "montage.png");
        }
        write_metadata(out, {{"command", "reconstruct"},
                             {"model", rc_model},
                             {"model_tag", model.ckpt.stage_tag}});
        std::printf("reconstructions written to %s\n", out.string().c_str());
    });

    // ---- complete ----------------------------------------------------------
    auto* cp = app.add_subcommand("complete", "latent-arithmetic shape completion");
    std::string cp_model, cp_data, cp_out, cp_class = "cranial", cp_subject;
    double cp_gamma = 1.0;
    cp->add_option("--model", cp_model, "checkpoint path")->required();
    cp->add_option("--data", cp_data, "dataset directory")->required();
    cp->add_option("--class", cp_class, "defect class: cranial or facial")
        ->check(CLI::IsMember({"cranial", "facial"}));
    cp->add_option("--gamma", cp_gamma, "completion extent (0 = reconstruction)");
    cp->add_option("--subject", cp_subject, "restrict to one subject id");
    cp->add_option("--out", cp_out, "output directory");
    cp->callback([&] {
        const LoadedModel model = load_model(cp_model);
        const TripletDataset ds = load_dataset(cp_data);
        const SkullClass cls = skull_class_from_string(cp_class);
        const DeviationVectors dev =
            deviation_vectors(encode_dataset(model.encoder, ds));
        const fs::path out = resolve_out(cp_out, "complete");
        for (const SkullTriplet& t : ds.triplets) {
            if (!cp_subject.empty() && t.subject_id != cp_subject) continue;
            const fs::path dir = out / t.subject_id;
            fs::create_directories(dir);
            const VoxelGrid& defective = t.grid(cls);
            const VoxelGrid completed = complete_shape(model.encoder, model.decoder,
                                                       defective, cls, cp_gamma, dev);
            const VoxelGrid implant =
                implant_extract(binarize(completed), binarize(defective));
            char name[64];
            std::snprintf(name, sizeof(name), "%s_completed_gamma%g.vox",
                          cp_class.c_str(), cp_gamma);
            save_voxel_file(completed, dir / name);
            std::snprintf(name, sizeof(name), "%s_implant_gamma%g.vox",
                          cp_class.c_str(), cp_gamma);
            save_voxel_file(implant, dir / name);
            std::vector<const VoxelGrid*> panels{&defective, &completed, &implant,
                                                 &t.complete};
            std::snprintf(name, sizeof(name), "%s_montage_gamma%g.png",
                          cp_class.c_str(), cp_gamma);
            write_png(slice_montage_image(panels), dir / name);
        }
        write_metadata(out, {{"command", "complete"},
                             {"model", cp_model},
                             {"class", cp_class},
                             {"gamma", cp_gamma}});
        std::printf("completions written to %s\n", out.string().c_str());
    });

    // ---- sweep-gamma -------------------------------------------------------
    auto* sg = app.add_subcommand("sweep-gamma", "decode a gamma sweep per subject");
    std::string sg_model, sg_data, sg_out, sg_class = "cranial", sg_subject;
    std::vector<double> sg_gammas{0.0, 0.25, 0.5, 0.75, 1.0, 1.5};
    sg->add_option("--model", sg_model, "checkpoint path")->required();
    sg->add_option("--data", sg_data, "dataset directory")->required();
    sg->add_option("--gammas", sg_gammas, "comma-separated gamma values")->delimiter(',');
    sg->add_option("--class", sg_class, "defect class")
        ->check(CLI::IsMember({"cranial", "facial"}));
    sg->add_option("--subject", sg_subject, "restrict to one subject id");
    sg->add_option("--out", sg_out, "output directory");
    sg->callback([&] {
        const LoadedModel model = load_model(sg_model);
        const TripletDataset ds = load_dataset(sg_data);
        const SkullClass cls = skull_class_from_string(sg_class);
        const DeviationVectors dev =
            deviation_vectors(encode_dataset(model.encoder, ds));
        const fs::path out = resolve_out(sg_out, "sweep_gamma");
        for (const SkullTriplet& t : ds.triplets) {
            if (!sg_subject.empty() && t.subject_id != sg_subject) continue;
            const fs::path dir = out / t.subject_id;
            fs::create_directories(dir);
            const GammaSweep sweep = sweep_gamma(model.encoder, model.decoder,
                                                 t.grid(cls), cls, sg_gammas, dev);
            std::vector<const VoxelGrid*> panels;
            for (std::size_t i = 0; i < sweep.outputs.size(); ++i) {
                char name[48];
                std::snprintf(name, sizeof(name), "gamma_%g.vox", sweep.gammas[i]);
                save_voxel_file(sweep.outputs[i], dir / name);
                panels.push_back(&sweep.outputs[i]);
            }
            write_png(slice_montage_image(panels), dir / "montage.png");
        }
        write_metadata(out, {{"command", "sweep-gamma"},
                             {"model", sg_model},
                             {"class", sg_class},
                             {"gammas", sg_gammas}});
        std::printf("gamma sweeps written to %s\n", out.string().c_str());
    });

    // ---- plot-latent -------------------------------------------------------
    auto* pl = app.add_subcommand("plot-latent",
                                  "PCA scatter of the three class latents");
    std::string pl_model, pl_data, pl_out;
    pl->add_option("--model", pl_model, "checkpoint path")->required();
    pl->add_option("--data", pl_data, "dataset directory")->required();
    pl->add_option("--out", pl_out, "output directory");
    pl->callback([&] {
        const LoadedModel model = load_model(pl_model);
        const TripletDataset ds = load_dataset(pl_data);
        const ClassLatents latents = encode_dataset(model.encoder, ds);
        const PcaProjection proj = pca_project(latents);
        const fs::path out = resolve_out(pl_out, "latent_plot");
        fs::create_directories(out);
        write_text(out / "latents_pca.csv", pca_csv(latents, proj));
        write_png(latent_scatter_image(proj), out / "latents_pca.png");
        write_metadata(out,
                       {{"command", "plot-latent"},
                        {"model", pl_model},
                        {"model_tag", model.ckpt.stage_tag},
                        {"explained_variance", proj.explained_variance},
                        {"degenerate", proj.degenerate}});
        std::printf("latent plot written to %s (explained variance %.3f + %.3f)\n",
                    out.string().c_str(), proj.explained_variance[0],
                    proj.explained_variance[1]);
    });

    // ---- evaluate ----------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "DSC evaluation (REC + CMP)");
    std::string ev_model, ev_data, ev_out, ev_tag;
    double ev_gamma = -1.0, ev_holdout = -1.0;
    std::uint64_t ev_split_seed = 0;
    bool ev_split_seed_set = false;
    ev->add_option("--model", ev_model, "checkpoint path")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--out", ev_out, "report directory");
    ev->add_option("--tag", ev_tag, "model tag for the report rows");
    ev->add_option("--gamma", ev_gamma, "completion gamma (default from config)");
    ev->add_option("--holdout", ev_holdout, "held-out fraction for CMP");
    ev->add_option("--split-seed", ev_split_seed, "subject split seed")
        ->each([&](const std::string&) { ev_split_seed_set = true; });
    ev->callback([&] {
        RunConfig cfg = effective_config();
        if (ev_gamma >= 0.0) cfg.gamma = ev_gamma;
        if (ev_holdout >= 0.0) cfg.eval_holdout_fraction = ev_holdout;
        if (ev_split_seed_set) cfg.eval_split_seed = ev_split_seed;

        const LoadedModel model = load_model(ev_model);
        const TripletDataset ds = load_dataset(ev_data);
        const std::string tag = ev_tag.empty() ? model.ckpt.stage_tag : ev_tag;

        const EvalSplit split = split_subjects(
            static_cast<int>(ds.triplets.size()), cfg.eval_holdout_fraction,
            cfg.eval_split_seed);
        const ClassLatents all_latents = encode_dataset(model.encoder, ds);
        const DeviationVectors dev =
            deviation_vectors(select_subjects(all_latents, split.held_in));

        EvalReport report;
        report.metadata = {{"model", ev_model},
                           {"model_tag", tag},
                           {"split_seed", cfg.eval_split_seed},
                           {"holdout_fraction", cfg.eval_holdout_fraction},
                           {"held_out_subjects", split.held_out},
                           {"gamma", cfg.gamma},
                           {"binarize_threshold", cfg.binarize_threshold},
                           {"dev_from", "held-in subjects"}};
        evaluate_reconstruction(
            report, tag,
            [&](const VoxelGrid& x) {
                return reconstruct(model.encoder, model.decoder, x);
            },
            ds);
        evaluate_completion(
            report, tag,
            [&](const VoxelGrid& x, SkullClass c, double gamma) {
                return complete_shape(model.encoder, model.decoder, x, c, gamma, dev);
            },
            ds, split.held_out, cfg.gamma);

        const fs::path out = resolve_out(ev_out, "eval_" + tag);
        emit_report(report, out);
        write_run_config(cfg, out / "run_config.json");
        std::printf("evaluation written to %s\n", out.string().c_str());
        for (const EvalSummary& s : report.summaries())
            std::printf("  %s %s %-8s mean DSC %.4f (n=%d)\n", s.model_tag.c_str(),
                        s.task.c_str(), s.skull_class.c_str(), s.mean, s.count);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
