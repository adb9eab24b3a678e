#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "canet/augment.hpp"
#include "canet/loss.hpp"
#include "canet/network.hpp"
#include "canet/tensor.hpp"

namespace canet {

struct train_config {
    std::int64_t batch_size = 2;
    std::int64_t epochs = 300;
    std::int64_t folds = 5;
    dims3 patch{64, 64, 64};
    std::int64_t steps_per_epoch = 50;
    double learning_rate = 0.01;
    double momentum = 0.99;
    double weight_decay = 3e-5;
    bool nesterov = true;
    double poly_exponent = 0.9;
    std::uint64_t seed = 0;
    double fg_bias = 0.5;             // fraction of patches centred on a foreground voxel
    double stop_at_train_dice = -1;   // early stop once the epoch-mean soft dice reaches this
    bool deterministic = true;        // single-worker, fixed-order execution
    bool augment_enabled = true;
    augment_config augment;
    loss_config loss;

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("train_config: batch_size must be >= 1");
        if (epochs < 1 || steps_per_epoch < 1) throw std::invalid_argument("train_config: bad schedule");
        if (folds < 2) throw std::invalid_argument("train_config: folds must be >= 2");
        if (patch.d < 1 || patch.h < 1 || patch.w < 1) throw std::invalid_argument("train_config: bad patch");
        if (fg_bias < 0 || fg_bias > 1) throw std::invalid_argument("train_config: fg_bias outside [0,1]");
        augment.validate();
    }
};

// ---- key-value config files ------------------------------------------------
//
// One `key = value` per line; '#' starts a comment. Keys mirror the
// train/network config fields. The CLI writes the fully resolved form into
// every output directory.

namespace detail {

struct kv_file {
    std::map<std::string, std::string> values;

    static kv_file parse(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("config: cannot open " + path);
        kv_file kv;
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            std::string key;
            if (!(ls >> key)) continue;
            std::string eq;
            ls >> eq;
            std::string rest;
            std::getline(ls, rest);
            const auto b = rest.find_first_not_of(" \t");
            rest = b == std::string::npos ? "" : rest.substr(b);
            const auto e = rest.find_last_not_of(" \t\r");
            rest = e == std::string::npos ? rest : rest.substr(0, e + 1);
            if (eq != "=" || rest.empty())
                throw std::runtime_error("config: malformed line " + std::to_string(lineno) + " in " + path);
            kv.values[key] = rest;
        }
        return kv;
    }

    bool take(const std::string& key, std::string& out) {
        auto it = values.find(key);
        if (it == values.end()) return false;
        out = it->second;
        values.erase(it);
        return true;
    }
    template <typename T>
    void number(const std::string& key, T& out) {
        std::string s;
        if (!take(key, s)) return;
        std::istringstream ss(s);
        double v;
        if (!(ss >> v)) throw std::runtime_error("config: bad number for " + key);
        out = T(v);
    }
    void boolean(const std::string& key, bool& out) {
        std::string s;
        if (!take(key, s)) return;
        if (s == "true" || s == "1") out = true;
        else if (s == "false" || s == "0") out = false;
        else throw std::runtime_error("config: bad boolean for " + key);
    }
};

inline const char* aggregation_name(dice_aggregation a) {
    return a == dice_aggregation::mean_over_foreground ? "mean_over_foreground" : "mean_over_all";
}

}  // namespace detail

/// Loads train + network settings from one key-value file. Unknown keys are
/// errors so typos cannot silently fall back to defaults.
inline void load_config(const std::string& path, train_config& tc, network_config& nc) {
    auto kv = detail::kv_file::parse(path);
    kv.number("batch_size", tc.batch_size);
    kv.number("epochs", tc.epochs);
    kv.number("folds", tc.folds);
    kv.number("patch_d", tc.patch.d);
    kv.number("patch_h", tc.patch.h);
    kv.number("patch_w", tc.patch.w);
    kv.number("steps_per_epoch", tc.steps_per_epoch);
    kv.number("learning_rate", tc.learning_rate);
    kv.number("momentum", tc.momentum);
    kv.number("weight_decay", tc.weight_decay);
    kv.boolean("nesterov", tc.nesterov);
    kv.number("poly_exponent", tc.poly_exponent);
    kv.number("seed", tc.seed);
    kv.number("fg_bias", tc.fg_bias);
    kv.number("stop_at_train_dice", tc.stop_at_train_dice);
    kv.boolean("deterministic", tc.deterministic);
    kv.boolean("augment_enabled", tc.augment_enabled);
    kv.number("aug_scale_lo", tc.augment.scale_lo);
    kv.number("aug_scale_hi", tc.augment.scale_hi);
    kv.number("aug_scale_prob", tc.augment.scale_prob);
    kv.number("aug_rotation_max_deg", tc.augment.rotation_max_deg);
    kv.number("aug_rotation_prob", tc.augment.rotation_prob);
    kv.number("aug_elastic_alpha_mm", tc.augment.elastic_alpha_mm);
    kv.number("aug_elastic_sigma_mm", tc.augment.elastic_sigma_mm);
    kv.number("aug_elastic_prob", tc.augment.elastic_prob);
    kv.boolean("aug_elastic_enabled", tc.augment.elastic_enabled);
    kv.number("aug_gamma_lo", tc.augment.gamma_lo);
    kv.number("aug_gamma_hi", tc.augment.gamma_hi);
    kv.number("aug_gamma_prob", tc.augment.gamma_prob);
    kv.number("loss_smooth", tc.loss.smooth);
    std::string agg;
    if (kv.take("dice_aggregation", agg)) {
        if (agg == "mean_over_foreground") tc.loss.aggregation = dice_aggregation::mean_over_foreground;
        else if (agg == "mean_over_all") tc.loss.aggregation = dice_aggregation::mean_over_all;
        else throw std::runtime_error("config: bad dice_aggregation: " + agg);
    }

    kv.number("stages", nc.stages);
    kv.number("base_filters", nc.base_filters);
    kv.number("filter_cap", nc.filter_cap);
    kv.number("extended_cap", nc.extended_cap);
    kv.boolean("channel_extend", nc.channel_extend);
    kv.boolean("aac_enabled", nc.aac_enabled);
    kv.boolean("aac_sequential", nc.aac_sequential);
    kv.number("in_channels", nc.in_channels);
    kv.number("num_classes", nc.num_classes);
    kv.number("heads", nc.heads);
    kv.number("norm_eps", nc.norm_eps);
    kv.number("pos_capacity", nc.pos_capacity);
    std::string mask;
    if (kv.take("aac_stage_mask", mask)) {
        nc.aac_stage_mask.clear();
        std::istringstream ms(mask);
        std::string tok;
        while (std::getline(ms, tok, ','))
            nc.aac_stage_mask.push_back(tok == "1" ? 1 : 0);
    }
    if (!kv.values.empty())
        throw std::runtime_error("config: unknown key: " + kv.values.begin()->first);
    tc.validate();
    nc.validate();
}

/// Writes the fully resolved configuration, every default materialised.
inline void save_config(const std::string& path, const train_config& tc, const network_config& nc) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path + " for writing");
    char buf[64];
    auto num = [&](const char* k, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        f << k << " = " << buf << "\n";
    };
    auto integer = [&](const char* k, std::int64_t v) { f << k << " = " << v << "\n"; };
    auto boolean = [&](const char* k, bool v) { f << k << " = " << (v ? "true" : "false") << "\n"; };
    integer("batch_size", tc.batch_size);
    integer("epochs", tc.epochs);
    integer("folds", tc.folds);
    integer("patch_d", tc.patch.d);
    integer("patch_h", tc.patch.h);
    integer("patch_w", tc.patch.w);
    integer("steps_per_epoch", tc.steps_per_epoch);
    num("learning_rate", tc.learning_rate);
    num("momentum", tc.momentum);
    num("weight_decay", tc.weight_decay);
    boolean("nesterov", tc.nesterov);
    num("poly_exponent", tc.poly_exponent);
    integer("seed", std::int64_t(tc.seed));
    num("fg_bias", tc.fg_bias);
    num("stop_at_train_dice", tc.stop_at_train_dice);
    boolean("deterministic", tc.deterministic);
    boolean("augment_enabled", tc.augment_enabled);
    num("aug_scale_lo", tc.augment.scale_lo);
    num("aug_scale_hi", tc.augment.scale_hi);
    num("aug_scale_prob", tc.augment.scale_prob);
    num("aug_rotation_max_deg", tc.augment.rotation_max_deg);
    num("aug_rotation_prob", tc.augment.rotation_prob);
    num("aug_elastic_alpha_mm", tc.augment.elastic_alpha_mm);
    num("aug_elastic_sigma_mm", tc.augment.elastic_sigma_mm);
    num("aug_elastic_prob", tc.augment.elastic_prob);
    boolean("aug_elastic_enabled", tc.augment.elastic_enabled);
    num("aug_gamma_lo", tc.augment.gamma_lo);
    num("aug_gamma_hi", tc.augment.gamma_hi);
    num("aug_gamma_prob", tc.augment.gamma_prob);
    num("loss_smooth", tc.loss.smooth);
    f << "dice_aggregation = " << detail::aggregation_name(tc.loss.aggregation) << "\n";
    integer("stages", nc.stages);
    integer("base_filters", nc.base_filters);
    integer("filter_cap", nc.filter_cap);
    integer("extended_cap", nc.extended_cap);
    boolean("channel_extend", nc.channel_extend);
    boolean("aac_enabled", nc.aac_enabled);
    boolean("aac_sequential", nc.aac_sequential);
    integer("in_channels", nc.in_channels);
    integer("num_classes", nc.num_classes);
    integer("heads", nc.heads);
    num("norm_eps", nc.norm_eps);
    integer("pos_capacity", nc.pos_capacity);
    if (!nc.aac_stage_mask.empty()) {
        f << "aac_stage_mask = ";
        for (std::size_t i = 0; i < nc.aac_stage_mask.size(); ++i)
            f << (i ? "," : "") << int(nc.aac_stage_mask[i]);
        f << "\n";
    }
}

}  // namespace canet
