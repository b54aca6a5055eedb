#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sadm/config.hpp"
#include "sadm/datagen.hpp"
#include "sadm/metrics.hpp"
#include "sadm/sampling.hpp"
#include "sadm/training.hpp"

namespace fs = std::filesystem;
using namespace sadm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::vector<int> parse_index_list(const std::string& s) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        out.push_back(std::stoi(s.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

RunConfig load_config(const std::string& path) {
    return path.empty() ? RunConfig{} : RunConfig::parse_file(path);
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
    RunConfig cfg = load_config(config_path);
    fs::create_directories(out_dir);
    Dataset ds = make_dataset(cfg.data_subjects, cfg.data_frames, cfg.extents, cfg.seed);
    std::ofstream manifest(out_dir + "/manifest.txt");
    int idx = 0;
    for (const char* split : {"train", "test"}) {
        const auto& subjects = std::string(split) == "train" ? ds.train : ds.test;
        for (const auto& subj : subjects) {
            char name[64];
            std::snprintf(name, sizeof(name), "subject_%03d.lvs", idx++);
            write_lvs(subj, out_dir + "/" + name);
            manifest << split << ' ' << name << '\n';
        }
    }
    std::ofstream echo(out_dir + "/config.echo");
    echo << cfg.echo();
    std::cout << "wrote " << idx << " subjects to " << out_dir << "\n";
    return kExitOk;
}

std::vector<LongitudinalVolume> load_split(const std::string& data_dir, const std::string& want) {
    std::ifstream manifest(data_dir + "/manifest.txt");
    if (!manifest) throw LvsError(LvsError::Kind::io, "no manifest.txt in " + data_dir);
    std::vector<LongitudinalVolume> out;
    std::string split, name;
    while (manifest >> split >> name)
        if (split == want) out.push_back(read_lvs(data_dir + "/" + name));
    return out;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir) {
    RunConfig cfg = load_config(config_path);
    fs::create_directories(out_dir);
    std::vector<LongitudinalVolume> dataset = data_dir.empty()
                                                  ? make_dataset(cfg.data_subjects, cfg.data_frames,
                                                                 cfg.extents, cfg.seed)
                                                        .train
                                                  : load_split(data_dir, "train");
    {
        std::ofstream echo(out_dir + "/config.echo");
        echo << cfg.echo();
    }
    Model model(cfg.model_config(), cfg.seed);
    TrainResult result = train(model, dataset, cfg.train, out_dir + "/ckpt", [](const TraceRow& r) {
        if (r.step % 100 == 0) std::cout << "step " << r.step << " loss " << r.loss << "\n";
    });
    write_trace_csv(result.trace, out_dir + "/loss.csv");
    std::cout << "final checkpoint: " << out_dir << "/ckpt/final.ckpt\n";
    return kExitOk;
}

IndexPartition partition_for_setting(const std::string& setting, int L, int horizon,
                                     const std::string& cond, const std::string& missing,
                                     const std::string& future) {
    IndexPartition p;
    if (setting == "single") {
        p.cond = {1};
        for (int i = 2; i <= L; ++i) p.future.push_back(i);
    } else if (setting == "full") {
        for (int i = 1; i <= L - horizon; ++i) p.cond.push_back(i);
        for (int i = L - horizon + 1; i <= L; ++i) p.future.push_back(i);
    } else if (setting == "missing") {
        if (cond.empty()) throw std::invalid_argument("missing setting requires --cond/--missing/--future");
        p.cond = parse_index_list(cond);
        if (!missing.empty()) p.missing = parse_index_list(missing);
        if (!future.empty()) p.future = parse_index_list(future);
    } else {
        throw std::invalid_argument("unknown setting '" + setting + "'");
    }
    if (auto why = validate_partition(p, L)) throw std::invalid_argument("invalid partition: " + *why);
    return p;
}

int cmd_sample(const std::string& config_path, const std::string& ckpt, const std::string& input,
               const std::string& out_path, const std::string& setting, int horizon,
               const std::string& cond, const std::string& missing, const std::string& future) {
    RunConfig cfg = load_config(config_path);
    LongitudinalVolume observed = read_lvs(input);
    const int L = static_cast<int>(observed.length());
    IndexPartition p = partition_for_setting(setting, L, horizon, cond, missing, future);

    Model model(cfg.model_config(), cfg.seed);
    model.store().load(ckpt);
    // Hide non-conditioning frames so generation cannot peek at them.
    LongitudinalVolume masked = observed;
    for (int i = 1; i <= L; ++i)
        if (!p.is_cond(i)) {
            masked.frames[static_cast<std::size_t>(i - 1)] = Tensor::zeros(observed.frame_shape());
            masked.present[static_cast<std::size_t>(i - 1)] = false;
        }
    LongitudinalVolume generated = autoregressive_sample(model, masked, p, cfg.sample);
    write_lvs(generated, out_path);
    std::cout << "wrote generated sequence to " << out_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path, const std::string& csv_out,
             const std::string& frames) {
    LongitudinalVolume pred = read_lvs(pred_path);
    LongitudinalVolume truth = read_lvs(truth_path);
    std::vector<int> idx;
    if (!frames.empty()) idx = parse_index_list(frames);
    MetricReport rep = evaluate_frames(truth, pred, idx);

    std::ostringstream csv;
    csv << "frame,ssim,psnr,nrmse\n";
    for (const auto& fm : rep.per_frame)
        csv << fm.frame << ',' << fm.ssim << ',' << fm.psnr << ',' << fm.nrmse << '\n';
    csv << "mean," << rep.mean_ssim << ',' << rep.mean_psnr << ',' << rep.mean_nrmse << '\n';
    if (!csv_out.empty()) {
        std::ofstream f(csv_out);
        f << csv.str();
    }
    std::cout << csv.str();
    std::printf("%-8s %8s %10s %8s\n", "frame", "ssim", "psnr", "nrmse");
    for (const auto& fm : rep.per_frame)
        std::printf("%-8d %8.4f %10.3f %8.4f\n", fm.frame, fm.ssim, fm.psnr, fm.nrmse);
    std::printf("%-8s %8.4f %10.3f %8.4f\n", "mean", rep.mean_ssim, rep.mean_psnr, rep.mean_nrmse);
    return kExitOk;
}

int cmd_render(const std::string& in_path, int frame, const std::string& axis, int slice,
               const std::string& out_path) {
    LongitudinalVolume v = read_lvs(in_path);
    if (frame < 1 || frame > v.length())
        throw std::invalid_argument("render: frame " + std::to_string(frame) + " out of range");
    const Tensor& vol = v.frames[static_cast<std::size_t>(frame - 1)];
    const std::int64_t W = vol.shape[0], H = vol.shape[1], D = vol.shape[2];
    std::int64_t rows, cols;
    std::function<double(std::int64_t, std::int64_t)> at;
    if (axis == "z") {
        if (slice < 0 || slice >= D) throw std::invalid_argument("render: slice out of range");
        rows = W, cols = H;
        at = [&](std::int64_t r, std::int64_t c) { return vol[r * H * D + c * D + slice]; };
    } else if (axis == "y") {
        if (slice < 0 || slice >= H) throw std::invalid_argument("render: slice out of range");
        rows = W, cols = D;
        at = [&](std::int64_t r, std::int64_t c) { return vol[r * H * D + slice * D + c]; };
    } else if (axis == "x") {
        if (slice < 0 || slice >= W) throw std::invalid_argument("render: slice out of range");
        rows = H, cols = D;
        at = [&](std::int64_t r, std::int64_t c) { return vol[slice * H * D + r * D + c]; };
    } else {
        throw std::invalid_argument("render: axis must be x, y, or z");
    }
    std::ofstream f(out_path);
    if (!f) throw std::invalid_argument("render: cannot open " + out_path);
    f << "P2\n" << cols << ' ' << rows << "\n255\n";
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
            int g = static_cast<int>(std::min(1.0, std::max(0.0, at(r, c))) * 255.0 + 0.5);
            f << g << (c + 1 < cols ? ' ' : '\n');
        }
    }
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequence-aware diffusion for longitudinal volumes"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, ckpt, input, out_path, setting = "full";
    std::string cond, missing, future, pred_path, truth_path, csv_out, frames, axis = "z";
    int horizon = 1, frame = 1, slice = 0;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--config", config_path);
    gen->add_option("--out", out_dir)->required();

    auto* tr = app.add_subcommand("train", "train a model");
    tr->add_option("--config", config_path);
    tr->add_option("--data", data_dir, "dataset directory (default: regenerate from config)");
    tr->add_option("--out", out_dir)->required();

    auto* sa = app.add_subcommand("sample", "autoregressive generation");
    sa->add_option("--config", config_path);
    sa->add_option("--ckpt", ckpt)->required();
    sa->add_option("--input", input)->required();
    sa->add_option("--out", out_path)->required();
    sa->add_option("--setting", setting, "single | missing | full");
    sa->add_option("--horizon", horizon, "future frames in the full setting");
    sa->add_option("--cond", cond);
    sa->add_option("--missing", missing);
    sa->add_option("--future", future);

    auto* ev = app.add_subcommand("eval", "metrics between generated and truth");
    ev->add_option("--pred", pred_path)->required();
    ev->add_option("--truth", truth_path)->required();
    ev->add_option("--out", csv_out);
    ev->add_option("--frames", frames, "1-based frame list, e.g. 2,4,6");

    auto* re = app.add_subcommand("render", "write one slice as plain PGM");
    re->add_option("--in", input)->required();
    re->add_option("--frame", frame);
    re->add_option("--axis", axis);
    re->add_option("--slice", slice);
    re->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
        if (tr->parsed()) return cmd_train(config_path, data_dir, out_dir);
        if (sa->parsed())
            return cmd_sample(config_path, ckpt, input, out_path, setting, horizon, cond, missing, future);
        if (ev->parsed()) return cmd_eval(pred_path, truth_path, csv_out, frames);
        if (re->parsed()) return cmd_render(input, frame, axis, slice, out_path);
    } catch (const LvsError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const CheckpointError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}
