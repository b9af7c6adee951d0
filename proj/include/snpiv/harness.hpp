#pragma once

#include <atomic>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "snpiv/contrastive.hpp"
#include "snpiv/diagnostics.hpp"
#include "snpiv/synthetic.hpp"
#include "snpiv/twostage.hpp"

namespace snpiv {

enum class Mode { Oracle, Learned };
const char* mode_name(Mode m);
Mode parse_mode(const std::string& text);

inline constexpr double kOracleRidge = 1e-8;
inline constexpr double kLearnedRidge = 1e-2;

struct GridConfig {
    std::vector<double> c_alpha{0.1, 0.5, 1.0};
    std::vector<double> c_sigma{0.1, 0.5, 1.0};
    std::size_t reps = 50;
    std::size_t n_labeled = 2000;
    std::size_t m_unlabeled = 20000;
    Mode mode = Mode::Oracle;
    std::size_t feature_dim = 50;
    std::uint64_t master_seed = 0;
    std::size_t d = 11;
    double noise_var = 0.1;
    bool features_per_rep = false;
    // Contrastive training in learned mode.
    std::size_t epochs = 100;
    std::size_t batch_size = 256;
    double reg_weight = 0.02;
    // Ridge for both stages relative to the mean Gram eigenvalue; unset means
    // kOracleRidge or kLearnedRidge depending on the mode.
    std::optional<double> relative_ridge;
    std::size_t threads = 0;  // 0: SNPIV_THREADS or the hardware count
    std::string out_path;

    void validate() const;
    double ridge() const;
    /// 500 reps, n = 10^4 labeled, m = 10^5 unlabeled.
    void apply_paper_scale();
};

struct RunRecord {
    double c_alpha = 0.0;
    double c_sigma = 0.0;
    std::size_t rep = 0;
    std::string mode;
    double mse = 0.0;          // NaN for a diverged learned rep
    double tau = 0.0;
    double tail_norm = 0.0;
    double epsilon_hat = 0.0;  // NaN in oracle mode
    double sigma_scale = 1.0;
    double wall_time_s = 0.0;

    /// Equality of everything except wall time.
    bool same_result(const RunRecord& other) const;
};

inline constexpr const char* kRunCsvHeader =
    "c_alpha,c_sigma,rep,mode,mse,tau,tail_norm,epsilon_hat,sigma_scale,wall_time_s";

/// Operator seed shared by every cell of a grid.
std::uint64_t operator_seed(std::uint64_t master_seed);
/// Per-rep data seed, independent of the total number of reps.
std::uint64_t rep_seed(std::uint64_t master_seed, double c_alpha, double c_sigma, std::size_t rep);

Scenario cell_scenario(const GridConfig& config, double c_alpha, double c_sigma);

/// 2SLS with eta and lambda set to relative_ridge times the mean diagonal of the matrix each one regularizes.
TwoStageFit fit_conditioned(std::shared_ptr<const FeatureMap> phi, std::shared_ptr<const FeatureMap> psi,
                            std::span<const LabeledSample> data, double relative_ridge);

/// Runs `reps` repetitions of one scenario. Checks `stop` between reps.
std::vector<RunRecord> run_cell(const Scenario& scenario, Mode mode, std::size_t reps, const GridConfig& config,
                                const std::atomic<bool>* stop = nullptr);

struct GridResult {
    std::vector<RunRecord> records;  // sorted by (c_alpha, c_sigma, rep)
    bool interrupted = false;
};

/// Every cell of the grid on a worker pool, rows in canonical order.
GridResult run_grid(const GridConfig& config, const std::atomic<bool>* stop = nullptr);

std::size_t worker_count(std::size_t requested, std::size_t tasks);

void write_run_csv(std::ostream& out, std::span<const RunRecord> records);
std::vector<RunRecord> read_run_csv(std::istream& in);

struct UglyConfig {
    std::size_t d = 11;
    double c = 1.0;
    std::vector<std::size_t> k_values{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::size_t n_labeled = 10000;
    double noise_var = 0.1;
    std::uint64_t seed = 0;
};

struct UglyRecord {
    std::size_t k = 0;
    double sigma_value = 0.0;       // common singular value after the nonnegativity rescale
    double floor = 0.0;             // sqrt(1 - k / (d - 1))
    double population_residual = 0.0;
    double finite_residual = 0.0;
};

/// sigma_{1..k} = c, the rest 0; h0 spread uniformly over all d - 1 directions.
std::vector<UglyRecord> run_ugly_sweep(const UglyConfig& config);
void write_ugly_csv(std::ostream& out, std::span<const UglyRecord> records);

/// Everything the `fit` subcommand reads from a key=value scenario file.
struct FitSpec {
    Scenario scenario;
    std::size_t n_labeled = 2000;
    std::size_t m_unlabeled = 20000;
    std::size_t k = 0;  // oracle working dimension; 0 means d - 1
    std::size_t feature_dim = 50;
    std::size_t epochs = 100;
    std::size_t batch_size = 256;
    double reg_weight = 0.02;
    std::optional<double> relative_ridge;
};

FitSpec read_fit_spec(std::istream& in);

struct FitOutcome {
    Vector x;
    Vector h0;
    Vector h_hat;
    DiagnosticsReport report;
};

FitOutcome run_fit(const FitSpec& spec, Mode mode);
void write_fit_csv(std::ostream& out, const FitOutcome& outcome);

enum class Statistic { Mean, Median };
Statistic parse_statistic(const std::string& text);

/// SVG heatmap of per-cell mse: columns c_alpha, rows c_sigma increasing downward.
std::string render_heatmap(std::istream& csv, Statistic stat);

/// Viridis-like colormap, t in [0, 1].
std::string colormap_hex(double t);

}  // namespace snpiv
