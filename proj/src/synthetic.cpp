#include "rankstab/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rankstab/error.hpp"
#include "rankstab/parallel.hpp"
#include "rankstab/random.hpp"

namespace rankstab {

void validate_world(const PlantedWorld& world) {
    if (world.models.size() < 2) throw ConfigError("planted world needs at least two models");
    for (const auto& m : world.models) {
        if (!world.true_quality.contains(m)) throw ConfigError(fmt::format("model '{}' has no true quality", m));
    }
    if (!(world.noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
    if (world.n_dialogues_per_cell < 2) throw ConfigError("n_dialogues_per_cell must be >= 2");
    if (!(world.lo < world.hi)) throw ConfigError("score range needs lo < hi");
}

ScoreMatrix synth_matrix(const PlantedWorld& world, std::span<const std::string> languages, std::string metric) {
    validate_world(world);
    ScoreMatrix m;
    m.metric = std::move(metric);
    m.models = world.models;
    m.languages.assign(languages.begin(), languages.end());
    for (const auto& model : world.models) {
        for (const auto& lang : languages) {
            double center = world.true_quality.at(model);
            if (auto it = world.bias.find({lang, model}); it != world.bias.end()) center += it->second;
            Rng rng(derive_seed(world.seed, hash_string(model + '\x1f' + lang)));
            std::vector<double> cell(world.n_dialogues_per_cell);
            for (auto& x : cell) {
                double v = center + (world.noise_sd > 0.0 ? world.noise_sd * rng.normal() : 0.0);
                if (world.mode == ScoreMode::clip_round) v = std::round(v);
                if (world.mode != ScoreMode::raw) v = std::clamp(v, world.lo, world.hi);
                x = v;
            }
            m.cells[{model, lang}] = std::move(cell);
        }
    }
    return m;
}

PlantedWorld evenly_spaced_world(std::size_t n, double top, double spacing) {
    PlantedWorld w;
    for (std::size_t i = 0; i < n; ++i) {
        const auto name = fmt::format("m{}", i);
        w.models.push_back(name);
        w.true_quality[name] = top - spacing * static_cast<double>(i);
    }
    return w;
}

void plant_reversal(PlantedWorld& world, const std::string& language) {
    validate_world(world);
    std::vector<std::string> order = world.models;
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return world.true_quality.at(a) < world.true_quality.at(b);
    });
    const std::size_t n = order.size();
    const double q_min = world.true_quality.at(order.front());
    const double q_max = world.true_quality.at(order.back());
    const double step = q_max > q_min ? (q_max - q_min) / static_cast<double>(n - 1) : 1.0;

    double top = q_max + step;
    double down = step / 2.0;
    if (world.mode != ScoreMode::raw) {
        top = std::min(top, (q_max + world.hi) / 2.0);
        down = std::min(down, (q_min - world.lo) / static_cast<double>(n));
        if (!(top > q_max) || !(down > 0.0)) {
            throw ConfigError("score range leaves no room to plant a reversal");
        }
    }
    world.bias[{language, order.front()}] = top - q_min;
    for (std::size_t j = 1; j < n; ++j) {
        const auto& model = order[j];
        world.bias[{language, model}] = q_min - down * static_cast<double>(j) - world.true_quality.at(model);
    }
}

std::vector<PowerRow> power_analysis(const PlantedWorld& world_template, const PowerOptions& options) {
    if (options.noise_grid.empty()) throw ConfigError("power analysis needs a non-empty noise grid");
    if (options.n_reps == 0) throw ConfigError("power analysis needs n_reps > 0");
    validate_world(world_template);
    const std::vector<std::string> languages{options.pair.first, options.pair.second};

    std::vector<PowerRow> rows;
    for (std::size_t g = 0; g < options.noise_grid.size(); ++g) {
        PowerRow row;
        row.noise_sd = options.noise_grid[g];
        row.n_reps = options.n_reps;
        row.p_values.assign(options.n_reps, 1.0);
        std::vector<int> inversions(options.n_reps, 0);
        const auto grid_seed = derive_seed(options.seed, g);
        parallel_for(options.n_reps, options.threads ? options.threads : hardware_threads(), [&](std::size_t r) {
            PlantedWorld w = world_template;
            w.noise_sd = row.noise_sd;
            w.seed = derive_seed(grid_seed, r);
            const auto matrix = synth_matrix(w, languages);
            PermutationOptions po = options.permutation;
            po.seed = derive_seed(w.seed, 0x9e37);
            po.threads = 1;
            const auto outcome = permutation_test(matrix, options.pair, po);
            row.p_values[r] = outcome.p_value;
            inversions[r] = outcome.observed;
        });
        double inv_sum = 0.0;
        for (std::size_t r = 0; r < options.n_reps; ++r) {
            if (row.p_values[r] < options.alpha) ++row.detections;
            inv_sum += inversions[r];
        }
        row.rate = static_cast<double>(row.detections) / static_cast<double>(options.n_reps);
        row.mean_inversions = inv_sum / static_cast<double>(options.n_reps);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace rankstab
