#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "snpiv/harness.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            const double v = snpiv::parse_double(item);
            if constexpr (std::is_integral_v<T>) {
                if (!(v >= 0.0) || v != static_cast<double>(static_cast<T>(v))) throw std::invalid_argument(item);
                out.push_back(static_cast<T>(v));
            } else {
                out.push_back(v);
            }
        } catch (const std::invalid_argument&) {
            throw CLI::ValidationError(flag, "bad list entry '" + item + "'");
        }
    }
    if (out.empty()) throw CLI::ValidationError(flag, "empty list");
    return out;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return in;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sieve NPIV with spectral features: synthetic experiments"};
    app.require_subcommand(1);

    snpiv::GridConfig grid;
    std::string grid_mode = "oracle";
    std::string c_alpha = "0.1,0.5,1.0";
    std::string c_sigma = "0.1,0.5,1.0";
    bool paper_scale = false;
    auto* g = app.add_subcommand("grid", "MSE over a (c_alpha, c_sigma) grid");
    g->add_option("--mode", grid_mode, "oracle or learned")->check(CLI::IsMember({"oracle", "learned"}));
    g->add_option("--d", grid.d, "1 + number of nonconstant singular triplets")->check(CLI::Range(2, 1000));
    g->add_option("--c-alpha", c_alpha, "comma-separated alignment decay values");
    g->add_option("--c-sigma", c_sigma, "comma-separated singular value decay values");
    g->add_option("--reps", grid.reps, "repetitions per cell")->check(CLI::PositiveNumber);
    g->add_option("--n-labeled", grid.n_labeled, "labeled samples per rep")->check(CLI::PositiveNumber);
    g->add_option("--m-unlabeled", grid.m_unlabeled, "unlabeled samples for contrastive training");
    g->add_option("--feature-dim", grid.feature_dim, "learned feature dimension")->check(CLI::PositiveNumber);
    g->add_option("--epochs", grid.epochs, "contrastive training epochs");
    g->add_option("--batch-size", grid.batch_size, "contrastive minibatch size");
    g->add_option("--reg-weight", grid.reg_weight, "contrastive regularizer weight")->check(CLI::NonNegativeNumber);
    g->add_option("--seed", grid.master_seed, "master seed");
    g->add_option("--relative-ridge", grid.relative_ridge,
                  "ridge for both stages relative to the Gram scale (default 1e-8 oracle, 1e-2 learned)")
        ->check(CLI::NonNegativeNumber);
    g->add_option("--out", grid.out_path, "output CSV")->required();
    g->add_flag("--paper-scale", paper_scale, "500 reps, n = 10^4, m = 10^5");
    g->add_flag("--features-per-rep", grid.features_per_rep, "train a fresh feature pair for every rep");

    snpiv::UglyConfig ugly;
    std::string k_list = "0,1,2,3,4,5,6,7,8,9,10";
    std::string ugly_out;
    auto* u = app.add_subcommand("ugly", "sweep over the number of nonzero singular values");
    u->add_option("--d", ugly.d, "1 + number of nonconstant singular triplets")->check(CLI::Range(2, 1000));
    u->add_option("--c", ugly.c, "common nonzero singular value before rescaling")->check(CLI::Range(0.0, 1.0));
    u->add_option("--k-list", k_list, "comma-separated k values");
    u->add_option("--seed", ugly.seed, "seed");
    u->add_option("--out", ugly_out, "output CSV")->required();

    std::string scenario_path;
    std::string fit_mode = "oracle";
    std::string fit_out;
    auto* f = app.add_subcommand("fit", "single scenario fit, h_hat and h0 on a grid");
    f->add_option("--scenario", scenario_path, "key=value scenario file")->required();
    f->add_option("--mode", fit_mode, "oracle or learned")->check(CLI::IsMember({"oracle", "learned"}));
    f->add_option("--out", fit_out, "output CSV")->required();

    std::string heat_in;
    std::string heat_stat = "median";
    std::string heat_out;
    auto* h = app.add_subcommand("heatmap", "SVG heatmap of a grid CSV");
    h->add_option("--in", heat_in, "grid CSV")->required();
    h->add_option("--stat", heat_stat, "mean or median")->check(CLI::IsMember({"mean", "median"}));
    h->add_option("--out", heat_out, "output SVG")->required();

    try {
        app.parse(argc, argv);
        if (*g) {
            grid.mode = snpiv::parse_mode(grid_mode);
            grid.c_alpha = parse_list<double>(c_alpha, "--c-alpha");
            grid.c_sigma = parse_list<double>(c_sigma, "--c-sigma");
            if (paper_scale) grid.apply_paper_scale();
            grid.validate();
            std::signal(SIGINT, on_sigint);
            const snpiv::GridResult result = snpiv::run_grid(grid, &g_stop);
            auto out = open_out(grid.out_path);
            snpiv::write_run_csv(out, result.records);
            std::cerr << "grid: " << result.records.size() << " rows, mode " << snpiv::mode_name(grid.mode)
                      << (grid.mode == snpiv::Mode::Learned
                              ? std::string(", features ") + (grid.features_per_rep ? "per rep" : "per cell") +
                                    ", epochs " + std::to_string(grid.epochs) + ", batch " +
                                    std::to_string(grid.batch_size) + ", reg weight " +
                                    snpiv::format_double(grid.reg_weight)
                              : std::string())
                      << ", relative ridge " << snpiv::format_double(grid.ridge()) << '\n';
            if (result.interrupted) {
                std::cerr << "grid: interrupted, partial results written\n";
                return 130;
            }
        } else if (*u) {
            ugly.k_values = parse_list<std::size_t>(k_list, "--k-list");
            const auto records = snpiv::run_ugly_sweep(ugly);
            auto out = open_out(ugly_out);
            snpiv::write_ugly_csv(out, records);
        } else if (*f) {
            auto in = open_in(scenario_path);
            const snpiv::FitSpec spec = snpiv::read_fit_spec(in);
            const snpiv::FitOutcome outcome = snpiv::run_fit(spec, snpiv::parse_mode(fit_mode));
            auto out = open_out(fit_out);
            snpiv::write_fit_csv(out, outcome);
            std::cout << snpiv::diagnostics_csv_header() << '\n' << snpiv::diagnostics_csv_row(outcome.report) << '\n';
        } else if (*h) {
            auto in = open_in(heat_in);
            const std::string svg = snpiv::render_heatmap(in, snpiv::parse_statistic(heat_stat));
            auto out = open_out(heat_out, std::ios::out | std::ios::binary);
            out << svg;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "snpiv: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
