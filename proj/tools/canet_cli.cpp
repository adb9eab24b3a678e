// Command-line front end for the segmentation pipeline: phantom dataset
// generation, preprocessing, fold-aware training, sliding-window inference,
// evaluation, gradient checking and the attention benchmark.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "canet/canet.hpp"

namespace fs = std::filesystem;
using namespace canet;

namespace {

std::string case_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "case_%03d", i);
    return buf;
}

std::vector<std::string> list_cases(const fs::path& dir) {
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        const std::string suffix = "_img.vvol";
        if (name.size() > suffix.size() && name.ends_with(suffix))
            ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw std::runtime_error("no *_img.vvol cases found in " + dir.string());
    return ids;
}

training_case load_case(const fs::path& dir, const std::string& id, bool with_labels = true) {
    training_case c;
    c.id = id;
    c.image = read_vvol_volume((dir / (id + "_img.vvol")).string());
    if (with_labels) c.labels = read_vvol_labels((dir / (id + "_lab.vvol")).string());
    return c;
}

void echo_config(const fs::path& dir, const train_config& tc, const network_config& nc) {
    fs::create_directories(dir);
    save_config((dir / "resolved_config.txt").string(), tc, nc);
}

struct cli_options {
    std::string config_path;
    train_config tc;
    network_config nc;
    void load() {
        if (!config_path.empty()) load_config(config_path, tc, nc);
    }
};

int cmd_phantom(const std::string& out_dir, int cases, std::int64_t edge, double spacing,
                std::uint64_t seed, double spacing_jitter) {
    fs::create_directories(out_dir);
    rng master(seed);
    for (int i = 0; i < cases; ++i) {
        rng r = master.fork(case_name(i));
        vec3 sp{spacing, spacing, spacing};
        if (spacing_jitter > 0) {
            sp.z *= 1.0 + r.uniform(-spacing_jitter, spacing_jitter);
            sp.y *= 1.0 + r.uniform(-spacing_jitter, spacing_jitter);
            sp.x *= 1.0 + r.uniform(-spacing_jitter, spacing_jitter);
        }
        auto [v, m] = gen_phantom(r, {edge, edge, edge}, sp);
        write_vvol((fs::path(out_dir) / (case_name(i) + "_img.vvol")).string(), v);
        write_vvol((fs::path(out_dir) / (case_name(i) + "_lab.vvol")).string(), m);
        std::cout << case_name(i) << " " << edge << "^3 spacing (" << sp.z << "," << sp.y << ","
                  << sp.x << ")\n";
    }
    return 0;
}

int cmd_preprocess(const std::string& data_dir, const std::string& out_dir, bool conventional_clip) {
    const auto ids = list_cases(data_dir);
    std::vector<volume> vols;
    std::vector<label_map> masks;
    for (const auto& id : ids) {
        auto c = load_case(data_dir, id);
        vols.push_back(std::move(c.image));
        masks.push_back(std::move(c.labels));
    }
    const auto stats = foreground_stats(vols, masks,
                                        conventional_clip ? clip_percentile_mode::conventional
                                                          : clip_percentile_mode::literal);
    fs::create_directories(out_dir);
    save_prep_stats(stats, (fs::path(out_dir) / "prep_stats.txt").string());
    std::cout << "target spacing (" << stats.target_spacing.z << "," << stats.target_spacing.y << ","
              << stats.target_spacing.x << ") clip [" << stats.clip_lo << "," << stats.clip_hi
              << "] mu " << stats.mu << " sigma " << stats.sigma << "\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto rv = clip_normalize(resample_image(vols[i], stats.target_spacing), stats);
        auto rm = resample_mask(masks[i], stats.target_spacing);
        write_vvol((fs::path(out_dir) / (ids[i] + "_img.vvol")).string(), rv);
        write_vvol((fs::path(out_dir) / (ids[i] + "_lab.vvol")).string(), rm);
        std::cout << ids[i] << " -> " << rv.dims.d << "x" << rv.dims.h << "x" << rv.dims.w << "\n";
    }
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_dir, cli_options& opt, int fold) {
    opt.load();
    const auto ids = list_cases(data_dir);
    std::vector<std::string> train_ids = ids, val_ids;
    if (fold >= 0) {
        if (fold >= opt.tc.folds) throw std::runtime_error("fold index out of range");
        auto folds = make_folds(ids, int(opt.tc.folds), opt.tc.seed);
        train_ids = folds[std::size_t(fold)].train_ids;
        val_ids = folds[std::size_t(fold)].val_ids;
    }
    std::vector<training_case> train_cases, val_cases;
    for (const auto& id : train_ids) train_cases.push_back(load_case(data_dir, id));
    for (const auto& id : val_ids) val_cases.push_back(load_case(data_dir, id));
    echo_config(out_dir, opt.tc, opt.nc);
    std::ofstream hist((fs::path(out_dir) / "history.txt").string());
    hist << "epoch train_loss train_dice val_dice\n";
    auto res = train(train_cases, val_cases, opt.tc, opt.nc,
                     [&](std::int64_t e, const epoch_stats& es) {
                         std::cout << "epoch " << e << " loss " << es.train_loss << " dice "
                                   << es.train_dice;
                         if (es.val_dice >= 0) std::cout << " val " << es.val_dice;
                         std::cout << "\n";
                         hist << e << " " << es.train_loss << " " << es.train_dice << " "
                              << es.val_dice << "\n";
                     });
    save_checkpoint(res.net, (fs::path(out_dir) / "checkpoint.bin").string());
    std::cout << "saved checkpoint after " << res.steps_done << " steps\n";
    return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& stats_path, const std::string& in,
              const std::string& out, cli_options& opt, bool whole_volume) {
    opt.load();
    auto net = load_checkpoint(checkpoint);
    auto stats = load_prep_stats(stats_path);
    infer_config ic;
    ic.patch = opt.tc.patch;
    ic.sliding_window = !whole_volume;
    auto native = read_vvol_volume(in);
    auto labels = infer(native, net, stats, ic);
    write_vvol(out, labels);
    std::int64_t fg = 0;
    for (auto c : labels.data) fg += c != 0;
    std::cout << "wrote " << out << " (" << fg << " foreground voxels)\n";
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out_path) {
    std::vector<report_row> rows;
    for (const auto& id : list_cases(gt_dir)) {
        const fs::path pred_path = fs::path(pred_dir) / (id + "_pred.vvol");
        if (!fs::exists(pred_path)) throw std::runtime_error("missing prediction " + pred_path.string());
        auto pred = read_vvol_labels(pred_path.string());
        auto gt = read_vvol_labels((fs::path(gt_dir) / (id + "_lab.vvol")).string());
        for (auto& r : report_rows(id, evaluate_case(pred, gt))) rows.push_back(std::move(r));
    }
    write_report(out_path, rows);
    std::cout << "wrote " << out_path << "\n";
    for (const auto& a : aggregate_report(rows)) {
        std::printf("%-8s dsc %.4f", a.class_name.c_str(), a.mean_dsc);
        if (a.with_distances)
            std::printf("  hd %.3f mm  avd %.3f mm  (%d/%d cases)", a.mean_hd_mm, a.mean_avd_mm,
                        a.with_distances, a.cases);
        else
            std::printf("  distances undefined (0/%d cases)", a.cases);
        std::printf("\n");
    }
    return 0;
}

int cmd_aggregate(const std::vector<std::string>& reports) {
    std::vector<report_row> rows;
    for (const auto& p : reports)
        for (auto& r : read_report(p)) rows.push_back(std::move(r));
    for (const auto& a : aggregate_report(rows)) {
        std::printf("%-8s dsc %.4f", a.class_name.c_str(), a.mean_dsc);
        if (a.with_distances)
            std::printf("  hd %.3f mm  avd %.3f mm  (%d/%d cases)", a.mean_hd_mm, a.mean_avd_mm,
                        a.with_distances, a.cases);
        std::printf("\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CANet multi-structure kidney segmentation pipeline"};
    app.require_subcommand(1);

    // phantom
    auto* ph = app.add_subcommand("phantom", "generate a seeded synthetic dataset");
    std::string out_dir, data_dir, in_path, out_path, ckpt_path, stats_path, gt_dir;
    int cases = 4;
    std::int64_t edge = 64;
    double spacing = 1.0, spacing_jitter = 0.0;
    std::uint64_t seed = 7;
    ph->add_option("--out", out_dir)->required();
    ph->add_option("--cases", cases);
    ph->add_option("--edge", edge);
    ph->add_option("--spacing", spacing);
    ph->add_option("--spacing-jitter", spacing_jitter);
    ph->add_option("--seed", seed);

    // preprocess
    auto* prep = app.add_subcommand("preprocess", "dataset statistics + resampled, normalised cases");
    bool conventional_clip = false;
    prep->add_option("--data", data_dir)->required();
    prep->add_option("--out", out_dir)->required();
    prep->add_flag("--conventional-clip", conventional_clip,
                   "clip at the [0.5, 99.5] percentiles instead of [0.05, 99.5]");

    // train
    cli_options opt;
    auto* tr = app.add_subcommand("train", "train on preprocessed cases");
    int fold = -1;
    bool deterministic = false;
    tr->add_option("--data", data_dir)->required();
    tr->add_option("--out", out_dir)->required();
    tr->add_option("--config", opt.config_path, "key-value config file");
    tr->add_option("--fold", fold, "fold index for cross-validation (-1: train on everything)");
    tr->add_flag("--deterministic", deterministic, "single-worker fixed-order mode");

    // infer
    auto* inf = app.add_subcommand("infer", "segment one volume");
    bool whole_volume = false;
    inf->add_option("--checkpoint", ckpt_path)->required();
    inf->add_option("--stats", stats_path)->required();
    inf->add_option("--in", in_path)->required();
    inf->add_option("--out", out_path)->required();
    inf->add_option("--config", opt.config_path);
    inf->add_flag("--whole-volume", whole_volume, "single forward pass instead of sliding window");

    // eval
    auto* ev = app.add_subcommand("eval", "DSC/HD/AVD report for predictions against ground truth");
    ev->add_option("--pred", out_dir)->required();
    ev->add_option("--gt", gt_dir)->required();
    ev->add_option("--out", out_path)->required();

    // aggregate
    auto* ag = app.add_subcommand("aggregate", "merge evaluation reports");
    std::vector<std::string> reports;
    ag->add_option("reports", reports)->required();

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the exact gradients");
    std::int64_t gc_base = 2, gc_stages = 2;
    bool gc_aac = true;
    std::uint64_t gc_seed = 1234;
    gc->add_option("--base", gc_base);
    gc->add_option("--stages", gc_stages);
    gc->add_option("--seed", gc_seed);
    gc->add_flag("--aac,!--no-aac", gc_aac);

    // bench-attn
    auto* ba = app.add_subcommand("bench-attn", "axial vs dense attention cost");
    std::vector<std::int64_t> edges{8, 16, 24};
    std::int64_t channels = 8;
    ba->add_option("--edges", edges);
    ba->add_option("--channels", channels);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ph) return cmd_phantom(out_dir, cases, edge, spacing, seed, spacing_jitter);
        if (*prep) return cmd_preprocess(data_dir, out_dir, conventional_clip);
        if (*tr) {
            if (deterministic) opt.tc.deterministic = true;
            return cmd_train(data_dir, out_dir, opt, fold);
        }
        if (*inf) return cmd_infer(ckpt_path, stats_path, in_path, out_path, opt, whole_volume);
        if (*ev) return cmd_eval(out_dir, gt_dir, out_path);
        if (*ag) return cmd_aggregate(reports);
        if (*ba) {
            std::cout << format_bench_table(bench_attention(edges, channels));
            return 0;
        }
        if (*gc) {
            // the gradcheck oracle lives in the test tree; here we report the
            // analytic-vs-numeric agreement on the loss for a quick field check
            network_config nc;
            nc.stages = gc_stages;
            nc.base_filters = gc_base;
            nc.aac_enabled = gc_aac;
            nc.pos_capacity = 8;
            network<double> net(nc);
            init_params(net, gc_seed);
            rng r(gc_seed + 1);
            tensor5d x(1, 1, 8, 8, 8);
            for (auto& v : x.data) v = r.normal();
            tensor5d target(1, nc.num_classes, 8, 8, 8);
            for (std::int64_t v = 0; v < 512; ++v)
                target.data[std::size_t(std::int64_t(r.uniform_index(std::uint64_t(nc.num_classes))) * 512 + v)] = 1.0;
            loss_config lc;
            lc.smooth = 1.0;
            forward_cache<double> cache;
            auto pred = softmax_channels(forward(net, x, &cache));
            auto loss = total_loss(pred, target, lc);
            auto back = backward(net, cache, loss.dlogits);
            // directional derivative against a random direction
            network<double> dir(nc);
            rng dr(gc_seed + 2);
            std::vector<std::vector<double>*> pp, gg, dd;
            visit_params(net, [&](const std::string&, std::vector<double>& v, const auto&) { pp.push_back(&v); });
            visit_params(back.grads, [&](const std::string&, std::vector<double>& v, const auto&) { gg.push_back(&v); });
            visit_params(dir, [&](const std::string&, std::vector<double>& v, const auto&) { dd.push_back(&v); });
            double analytic = 0;
            for (std::size_t i = 0; i < pp.size(); ++i)
                for (std::size_t j = 0; j < pp[i]->size(); ++j) {
                    (*dd[i])[j] = dr.normal();
                    analytic += (*gg[i])[j] * (*dd[i])[j];
                }
            const double h = 1e-6;
            auto shift = [&](double t) {
                for (std::size_t i = 0; i < pp.size(); ++i)
                    for (std::size_t j = 0; j < pp[i]->size(); ++j) (*pp[i])[j] += t * (*dd[i])[j];
            };
            auto value = [&] {
                auto p2 = softmax_channels(forward(net, x));
                return dice_loss(p2, target, lc) + ce_loss(p2, target);
            };
            shift(h);
            const double lp = value();
            shift(-2 * h);
            const double lm = value();
            shift(h);
            const double fd = (lp - lm) / (2 * h);
            const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-12});
            std::printf("directional derivative: analytic %.10e numeric %.10e rel %.3e\n", analytic,
                        fd, rel);
            std::printf("%s\n", rel < 1e-6 ? "OK" : "MISMATCH");
            return rel < 1e-6 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
