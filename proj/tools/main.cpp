#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "isd/config.hpp"
#include "isd/data.hpp"
#include "isd/errors.hpp"
#include "isd/metrics.hpp"
#include "isd/sampler.hpp"
#include "isd/trainer.hpp"

namespace fs = std::filesystem;
using namespace isd;

namespace {

struct SizeSpec {
    int depth = 33, height = 64, width = 64;
};

SizeSpec parse_size(const std::string& s) {
    SizeSpec out;
    if (std::sscanf(s.c_str(), "%d,%d,%d", &out.depth, &out.height, &out.width) != 3)
        throw ConfigError("--size expects D,H,W");
    return out;
}

std::vector<std::string> data_dir_volumes(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir);
    std::vector<std::string> paths;
    fs::path manifest = fs::path(dir) / "manifest.txt";
    if (fs::exists(manifest)) {
        std::ifstream is(manifest);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("path,", 0) == 0) continue;
            size_t comma = line.find(',');
            std::string rel = comma == std::string::npos ? line : line.substr(0, comma);
            paths.push_back((fs::path(dir) / rel).string());
        }
    } else {
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".isdv") paths.push_back(e.path().string());
        std::sort(paths.begin(), paths.end());
    }
    if (paths.empty()) throw DataError("no volumes found in " + dir);
    return paths;
}

void write_inspection_pgms(const Volume& v, const std::string& dir) {
    fs::create_directories(dir);
    auto [mn_it, mx_it] = std::minmax_element(v.voxels.begin(), v.voxels.end());
    double mn = *mn_it, mx = *mx_it;
    double scale = mx > mn ? 2.0 / (mx - mn) : 0.0;
    auto to_display = [&](double x) { return scale == 0.0 ? 0.0 : (x - mn) * scale - 1.0; };

    Tensor axial({v.depth, v.width});
    int mid_h = v.height / 2;
    for (int d = 0; d < v.depth; ++d)
        for (int w = 0; w < v.width; ++w) axial.at(d, w) = to_display(v.at(d, mid_h, w));
    export_slice_pgm(axial, (fs::path(dir) / "axial_mid.pgm").string());

    Tensor coronal({v.depth, v.height});
    int mid_w = v.width / 2;
    for (int d = 0; d < v.depth; ++d)
        for (int h = 0; h < v.height; ++h) coronal.at(d, h) = to_display(v.at(d, h, mid_w));
    export_slice_pgm(coronal, (fs::path(dir) / "coronal_mid.pgm").string());
}

int cmd_gen_data(const std::string& out_dir, int count, const SizeSpec& size, uint64_t seed,
                 int pad_multiple) {
    if (count < 1) throw ConfigError("--count must be >= 1");
    fs::create_directories(out_dir);

    std::cout << "gen-data: count=" << count << " size=" << size.depth << "," << size.height
              << "," << size.width << " seed=" << seed << " pad_multiple=" << pad_multiple
              << "\n";

    std::ostringstream manifest;
    manifest << "# isdiff gen-data manifest\n";
    manifest << "# seed=" << seed << " size=" << size.depth << "," << size.height << ","
             << size.width << " pad_multiple=" << pad_multiple << "\n";
    manifest << "path,seed,depth,height,width,pad_h,pad_w\n";

    for (int i = 0; i < count; ++i) {
        uint64_t vol_seed = nn::derive_seed(seed, static_cast<uint64_t>(i));
        Volume v = make_phantom_volume(vol_seed, size.depth, size.height, size.width);
        Volume padded = pad_hw_to_multiple(v, pad_multiple);
        char name[32];
        std::snprintf(name, sizeof(name), "vol_%03d.isdv", i);
        write_volume((fs::path(out_dir) / name).string(), padded);
        manifest << name << "," << vol_seed << "," << padded.depth << "," << padded.height << ","
                 << padded.width << "," << padded.height - v.height << ","
                 << padded.width - v.width << "\n";
    }
    std::ofstream mf(fs::path(out_dir) / "manifest.txt", std::ios::trunc);
    mf << manifest.str();
    if (!mf) throw IoError("cannot write manifest");
    std::cout << "wrote " << count << " volumes + manifest to " << out_dir << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) throw ConfigError("train: --data is required");
    if (cfg.out_path.empty()) throw ConfigError("train: --out is required");

    std::cout << "train: resolved configuration\n" << canonical_config(cfg);
    std::cout << "root seed = " << cfg.seed << "\n";

    std::vector<Volume> volumes;
    for (const auto& p : data_dir_volumes(cfg.data_dir))
        volumes.push_back(normalize_volume(read_volume(p)));
    std::cout << "loaded " << volumes.size() << " volumes from " << cfg.data_dir << "\n";

    TrainHooks hooks;
    hooks.log_path = cfg.out_path + ".log";
    hooks.ckpt_path = cfg.out_path;
    TrainState state = train_loop(cfg, volumes, hooks);
    std::cout << "finished at step " << state.step << "; checkpoint: " << cfg.out_path << "\n";
    return 0;
}

int cmd_sample(const std::string& ckpt_path, const std::string& in_path, int ratio,
               const std::string& sampler, int steps, bool steps_given, uint64_t seed,
               const std::string& out_path, const std::string& pgm_dir, int jobs) {
    TrainState state = load_checkpoint(ckpt_path);

    SamplerConfig scfg;
    if (sampler == "ddpm") {
        scfg.mode = SamplerMode::Ddpm;
        if (steps_given)
            std::cerr << "warning: --steps is ignored with the DDPM sampler (it always uses the"
                         " full schedule)\n";
    } else if (sampler == "ddim") {
        scfg.mode = SamplerMode::Ddim;
        scfg.steps = steps;
    } else {
        throw ConfigError("--sampler must be 'ddim' or 'ddpm'");
    }
    scfg.seed = seed;
    scfg.jobs = jobs;

    std::cout << "sample: ckpt=" << ckpt_path << " in=" << in_path << " ratio=" << ratio
              << " sampler=" << sampler << " steps=" << (scfg.mode == SamplerMode::Ddim
                                                             ? scfg.steps
                                                             : state.cfg.diffusion_steps)
              << " seed=" << seed << " jobs=" << jobs << "\n";

    Volume in = read_volume(in_path);
    bool was_raw = in.range == Volume::Range::Raw;
    Volume lr = was_raw ? normalize_volume(in) : in;

    NoiseSchedule sched = make_linear_schedule(state.cfg.diffusion_steps, state.cfg.beta_start,
                                               state.cfg.beta_end);
    Volume hr = super_resolve_volume(lr, ratio, state.model, sched, scfg);
    Volume out = was_raw ? denormalize_volume(hr) : hr;
    write_volume(out_path, out);
    std::cout << "wrote " << out.depth << "x" << out.height << "x" << out.width << " volume to "
              << out_path << "\n";

    if (!pgm_dir.empty()) write_inspection_pgms(out, pgm_dir);
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& label,
             int ratio, bool baseline_interp, const std::string& report_path) {
    Volume pred = read_volume(pred_path);
    Volume gt = read_volume(gt_path);
    if (pred.depth != gt.depth || pred.height != gt.height || pred.width != gt.width)
        throw DimError("eval: prediction and reference shapes differ");

    std::vector<MetricsReport> rows;
    rows.push_back(evaluate(pred, gt, label, ratio));

    if (baseline_interp) {
        Volume lr = downsample_volume(gt, ratio);
        Volume interp = trilinear_interpolate(lr, ratio);
        if (interp.depth != gt.depth)
            throw DataError("eval: (depth-1) must be divisible by the ratio for the"
                            " interpolation baseline; crop the reference first");
        rows.push_back(evaluate(interp, gt, "interp", ratio));
    }

    print_report(std::cout, rows);
    if (!report_path.empty()) {
        std::ofstream rf(report_path, std::ios::app);
        if (!rf) throw IoError("cannot open report file: " + report_path);
        for (const auto& r : rows) rf << report_csv_row(r) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Slice-interpolation diffusion: generate, train, sample, evaluate"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Write synthetic phantom volumes + manifest");
    std::string gen_out;
    int gen_count = 3;
    std::string gen_size = "33,64,64";
    uint64_t gen_seed = 0;
    int gen_pad = 8;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--count", gen_count, "Number of volumes");
    gen->add_option("--size", gen_size, "Volume size D,H,W");
    gen->add_option("--seed", gen_seed, "Root seed");
    gen->add_option("--pad-multiple", gen_pad, "Pad H,W up to this multiple");

    // train
    auto* train = app.add_subcommand("train", "Train the denoiser on a volume directory");
    std::string train_config, train_data, train_out;
    uint64_t train_seed = 0;
    long long train_iters = 0;
    double train_lr = 0.0;
    bool train_ablate = false;
    train->add_option("--config", train_config, "key = value configuration file");
    train->add_option("--data", train_data, "Directory of ISDV volumes")->required();
    train->add_option("--out", train_out, "Checkpoint path")->required();
    auto* opt_seed = train->add_option("--seed", train_seed, "Root seed override");
    auto* opt_iters = train->add_option("--iters", train_iters, "Iteration override");
    auto* opt_lr = train->add_option("--lr", train_lr, "Learning rate override");
    train->add_flag("--ablate", train_ablate, "Concatenation conditioning variant");

    // sample
    auto* sample = app.add_subcommand("sample", "Super-resolve a volume along the slice axis");
    std::string smp_ckpt, smp_in, smp_out, smp_sampler = "ddim", smp_pgm;
    int smp_ratio = 4, smp_steps = 100, smp_jobs = 1;
    uint64_t smp_seed = 0;
    sample->add_option("--ckpt", smp_ckpt, "Checkpoint path")->required();
    sample->add_option("--in", smp_in, "Input ISDV volume")->required();
    sample->add_option("--ratio", smp_ratio, "Integer upsampling ratio")->required();
    sample->add_option("--sampler", smp_sampler, "ddim | ddpm");
    auto* opt_steps = sample->add_option("--steps", smp_steps, "DDIM step count");
    sample->add_option("--seed", smp_seed, "Sampling seed");
    sample->add_option("--out", smp_out, "Output ISDV volume")->required();
    sample->add_option("--pgm-dir", smp_pgm, "Write axial/coronal inspection PGMs here");
    sample->add_option("--jobs", smp_jobs, "Parallel slice workers");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a prediction against a reference");
    std::string ev_pred, ev_gt, ev_label = "model", ev_report;
    int ev_ratio = 4;
    bool ev_interp = false;
    eval->add_option("--pred", ev_pred, "Predicted ISDV volume")->required();
    eval->add_option("--gt", ev_gt, "Reference ISDV volume")->required();
    eval->add_option("--label", ev_label, "Method label for the report");
    eval->add_option("--ratio", ev_ratio, "Upsampling ratio used")->required();
    eval->add_flag("--baseline-interp", ev_interp,
                   "Also report linear interpolation from the decimated reference");
    eval->add_option("--report", ev_report, "Append CSV rows to this file");

    try {
        app.parse(argc, argv);

        if (gen->parsed())
            return cmd_gen_data(gen_out, gen_count, parse_size(gen_size), gen_seed, gen_pad);
        if (train->parsed()) {
            RunConfig cfg;
            if (!train_config.empty()) cfg = parse_config_file(train_config, cfg);
            if (*opt_seed) cfg.seed = train_seed;
            if (*opt_iters) cfg.iters = train_iters;
            if (*opt_lr) cfg.lr = train_lr;
            if (train_ablate) cfg.ablate = true;
            cfg.data_dir = train_data;
            cfg.out_path = train_out;
            return cmd_train(cfg);
        }
        if (sample->parsed())
            return cmd_sample(smp_ckpt, smp_in, smp_ratio, smp_sampler, smp_steps,
                              static_cast<bool>(*opt_steps), smp_seed, smp_out, smp_pgm,
                              smp_jobs);
        if (eval->parsed())
            return cmd_eval(ev_pred, ev_gt, ev_label, ev_ratio, ev_interp, ev_report);
        return 2;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical fault: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
