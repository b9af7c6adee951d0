#include "snpiv/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace snpiv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kEvalNodes = 1024;
constexpr std::uint64_t kOperatorTag = 0x6f70;
constexpr std::uint64_t kTrainTag = 0x7472;
constexpr std::uint64_t kUnlabeledTag = 0x756e;

std::string num(double v) { return std::isnan(v) ? std::string() : format_double(v); }

double elapsed_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

Matrix symmetrized(Matrix m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j) m(i, j) = m(j, i) = 0.5 * (m(i, j) + m(j, i));
    return m;
}

double mean_diagonal(const Matrix& m) {
    double t = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
    return m.rows() ? t / static_cast<double>(m.rows()) : 0.0;
}

ContrastiveConfig contrastive_config(const GridConfig& c, std::uint64_t seed) {
    ContrastiveConfig cc;
    cc.feature_dim = c.feature_dim;
    cc.batch_size = c.batch_size;
    cc.epochs = c.epochs;
    cc.reg_weight = c.reg_weight;
    cc.seed = seed;
    return cc;
}

struct LearnedPair {
    std::shared_ptr<const FeatureMap> phi;
    std::shared_ptr<const FeatureMap> psi;
    double tau = kNaN;
    double tail = kNaN;
    double eps = kNaN;
};

std::optional<LearnedPair> learn_features(const ScenarioModel& model, const GridConfig& config, std::uint64_t seed) {
    Rng rng(mix_seed({seed, kUnlabeledTag}));
    const auto unlabeled = rejection_sample(model.op, config.m_unlabeled, rng);
    ContrastiveConfig cc = contrastive_config(config, mix_seed({seed, kTrainTag}));
    cc.batch_size = std::min(cc.batch_size, unlabeled.size());
    std::optional<TrainedFeatures> trained;
    try {
        trained = train(cc, unlabeled);
    } catch (const TrainingDiverged&) {
        return std::nullopt;
    }
    LearnedPair pair;
    pair.phi = std::make_shared<MlpFeatures>(std::move(trained->phi));
    pair.psi = std::make_shared<MlpFeatures>(std::move(trained->psi));
    const Grid grid = Grid::uniform(kEvalNodes);
    try {
        pair.tau = tau_sieve(*pair.phi, model.op, grid);
    } catch (const RankDeficientError&) {
        pair.tau = std::numeric_limits<double>::infinity();
    }
    pair.tail = span_residual(*pair.phi, model.h0.evaluate(grid.nodes), grid);
    try {
        pair.eps = epsilon_hat(*pair.phi, *pair.psi, model.op, std::min(config.feature_dim, model.op.rank()), grid);
    } catch (const TieError&) {
        pair.eps = kNaN;
    }
    return pair;
}

}  // namespace

const char* mode_name(Mode m) { return m == Mode::Oracle ? "oracle" : "learned"; }

Mode parse_mode(const std::string& text) {
    if (text == "oracle") return Mode::Oracle;
    if (text == "learned") return Mode::Learned;
    throw std::invalid_argument("unknown mode '" + text + "' (expected oracle or learned)");
}

void GridConfig::validate() const {
    if (c_alpha.empty() || c_sigma.empty()) throw std::invalid_argument("GridConfig: empty parameter list");
    if (reps < 1) throw std::invalid_argument("GridConfig: reps must be >= 1");
    if (n_labeled < 1) throw std::invalid_argument("GridConfig: n_labeled must be >= 1");
    if (mode == Mode::Learned && m_unlabeled < 2) throw std::invalid_argument("GridConfig: m_unlabeled must be >= 2");
    if (feature_dim < 1) throw std::invalid_argument("GridConfig: feature_dim must be >= 1");
    if (relative_ridge && !(*relative_ridge >= 0.0)) throw std::invalid_argument("GridConfig: relative_ridge must be >= 0");
    for (double a : c_alpha)
        for (double s : c_sigma) cell_scenario(*this, a, s).validate();
}

double GridConfig::ridge() const {
    return relative_ridge.value_or(mode == Mode::Oracle ? kOracleRidge : kLearnedRidge);
}

void GridConfig::apply_paper_scale() {
    reps = 500;
    n_labeled = 10000;
    m_unlabeled = 100000;
}

bool RunRecord::same_result(const RunRecord& o) const {
    const auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return c_alpha == o.c_alpha && c_sigma == o.c_sigma && rep == o.rep && mode == o.mode && same(mse, o.mse) &&
           same(tau, o.tau) && same(tail_norm, o.tail_norm) && same(epsilon_hat, o.epsilon_hat) &&
           same(sigma_scale, o.sigma_scale);
}

std::uint64_t operator_seed(std::uint64_t master_seed) { return mix_seed({master_seed, kOperatorTag}); }

std::uint64_t rep_seed(std::uint64_t master_seed, double c_alpha, double c_sigma, std::size_t rep) {
    return mix_seed({master_seed, seed_bits(c_alpha), seed_bits(c_sigma), rep});
}

Scenario cell_scenario(const GridConfig& config, double c_alpha, double c_sigma) {
    Scenario s;
    s.d = config.d;
    s.c_alpha = c_alpha;
    s.c_sigma = c_sigma;
    s.noise_var = config.noise_var;
    s.seed_op = operator_seed(config.master_seed);
    s.seed_data = config.master_seed;
    return s;
}

TwoStageFit fit_conditioned(std::shared_ptr<const FeatureMap> phi, std::shared_ptr<const FeatureMap> psi,
                            std::span<const LabeledSample> data, double relative_ridge) {
    const Matrix fx = phi->evaluate_batch(xs_of(data));
    const Matrix fz = psi->evaluate_batch(zs_of(data));
    const Moments m = empirical_moments(fx, fz, ys_of(data));
    const double eta = relative_ridge * mean_diagonal(m.gram_psi);
    Matrix a = stage1_from_moments(m, eta);
    const double lambda = relative_ridge * mean_diagonal(symmetrized(multiply_a_bt(multiply(a, m.gram_psi), a)));
    Vector theta = stage2_from_moments(a, m, lambda);
    return {std::move(a), std::move(theta), std::move(phi), std::move(psi)};
}

std::vector<RunRecord> run_cell(const Scenario& scenario, Mode mode, std::size_t reps, const GridConfig& config,
                                const std::atomic<bool>* stop) {
    const ScenarioModel model = build_scenario(scenario);
    const Grid grid = Grid::uniform(kEvalNodes);
    const std::size_t r = model.op.rank();
    const auto stopped = [&] { return stop && stop->load(); };

    std::shared_ptr<const FeatureMap> oracle_phi;
    std::shared_ptr<const FeatureMap> oracle_psi;
    double oracle_tau = kNaN;
    std::optional<LearnedPair> shared_pair;
    if (mode == Mode::Oracle) {
        oracle_phi = std::make_shared<OracleFeatures>(model.op, Side::X, r);
        oracle_psi = std::make_shared<OracleFeatures>(model.op, Side::Z, r);
        oracle_tau = tau_sieve(*oracle_phi, model.op, grid);
    } else if (!config.features_per_rep && reps > 0 && !stopped()) {
        shared_pair = learn_features(
            model, config, mix_seed({config.master_seed, seed_bits(scenario.c_alpha), seed_bits(scenario.c_sigma)}));
    }

    std::vector<RunRecord> out;
    for (std::size_t rep = 0; rep < reps && !stopped(); ++rep) {
        const auto start = std::chrono::steady_clock::now();
        const std::uint64_t seed = rep_seed(config.master_seed, scenario.c_alpha, scenario.c_sigma, rep);
        RunRecord rec;
        rec.c_alpha = scenario.c_alpha;
        rec.c_sigma = scenario.c_sigma;
        rec.rep = rep;
        rec.mode = mode_name(mode);
        rec.sigma_scale = model.op.scale();
        rec.epsilon_hat = kNaN;

        std::shared_ptr<const FeatureMap> phi = oracle_phi;
        std::shared_ptr<const FeatureMap> psi = oracle_psi;
        if (mode == Mode::Oracle) {
            rec.tau = oracle_tau;
            rec.tail_norm = tail_norm(model.h0.alpha, r);
        } else {
            const std::optional<LearnedPair> pair =
                config.features_per_rep ? learn_features(model, config, mix_seed({seed, kTrainTag})) : shared_pair;
            if (!pair) {
                rec.mode = "learned-diverged";
                rec.mse = rec.tau = rec.tail_norm = kNaN;
                rec.wall_time_s = elapsed_since(start);
                out.push_back(rec);
                continue;
            }
            phi = pair->phi;
            psi = pair->psi;
            rec.tau = pair->tau;
            rec.tail_norm = pair->tail;
            rec.epsilon_hat = pair->eps;
        }

        Rng rng(seed);
        const auto pairs = rejection_sample(model.op, config.n_labeled, rng);
        const auto data = sample_outcomes(model.op, model.h0, pairs, scenario.noise_var, rng);
        const TwoStageFit fit = fit_conditioned(phi, psi, data, config.ridge());
        const double err = l2_error(fit, model.h0, grid);
        rec.mse = err * err;
        rec.wall_time_s = elapsed_since(start);
        out.push_back(rec);
    }
    return out;
}

std::size_t worker_count(std::size_t requested, std::size_t tasks) {
    std::size_t n = requested;
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SNPIV_THREADS")) {
        char* end = nullptr;
        const unsigned long cap = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && cap > 0) n = std::min<std::size_t>(n, cap);
    }
    return std::max<std::size_t>(1, std::min(n, tasks));
}

GridResult run_grid(const GridConfig& config, const std::atomic<bool>* stop) {
    config.validate();
    std::vector<std::pair<double, double>> cells;
    for (double a : config.c_alpha)
        for (double s : config.c_sigma) cells.emplace_back(a, s);

    std::vector<std::vector<RunRecord>> results(cells.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            if (stop && stop->load()) return;
            try {
                const Scenario s = cell_scenario(config, cells[i].first, cells[i].second);
                results[i] = run_cell(s, config.mode, config.reps, config, stop);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    const std::size_t n_workers = worker_count(config.threads, cells.size());
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    GridResult out;
    for (auto& cell : results) out.records.insert(out.records.end(), cell.begin(), cell.end());
    std::sort(out.records.begin(), out.records.end(), [](const RunRecord& a, const RunRecord& b) {
        if (a.c_alpha != b.c_alpha) return a.c_alpha < b.c_alpha;
        if (a.c_sigma != b.c_sigma) return a.c_sigma < b.c_sigma;
        return a.rep < b.rep;
    });
    out.interrupted = stop && stop->load();
    return out;
}

void write_run_csv(std::ostream& out, std::span<const RunRecord> records) {
    out << kRunCsvHeader << '\n';
    for (const RunRecord& r : records)
        out << num(r.c_alpha) << ',' << num(r.c_sigma) << ',' << r.rep << ',' << r.mode << ',' << num(r.mse) << ','
            << num(r.tau) << ',' << num(r.tail_norm) << ',' << num(r.epsilon_hat) << ',' << num(r.sigma_scale) << ','
            << num(r.wall_time_s) << '\n';
}

std::vector<RunRecord> read_run_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("run csv: empty input");
    if (trim(line) != kRunCsvHeader) throw std::invalid_argument("run csv: line 1: unexpected header");
    std::vector<RunRecord> out;
    std::size_t line_no = 1;
    const auto field = [&](const std::string& text) {
        if (text.empty()) return kNaN;
        try {
            return parse_double(text);
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("run csv: line " + std::to_string(line_no) + ": bad number '" + text + "'");
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != 10)
            throw std::invalid_argument("run csv: line " + std::to_string(line_no) + ": expected 10 fields, got " +
                                        std::to_string(cells.size()));
        RunRecord r;
        r.c_alpha = field(cells[0]);
        r.c_sigma = field(cells[1]);
        const double rep = field(cells[2]);
        if (std::isnan(r.c_alpha) || std::isnan(r.c_sigma) || !(rep >= 0.0) || rep != std::floor(rep))
            throw std::invalid_argument("run csv: line " + std::to_string(line_no) + ": missing key field");
        r.rep = static_cast<std::size_t>(rep);
        r.mode = cells[3];
        r.mse = field(cells[4]);
        r.tau = field(cells[5]);
        r.tail_norm = field(cells[6]);
        r.epsilon_hat = field(cells[7]);
        r.sigma_scale = field(cells[8]);
        r.wall_time_s = field(cells[9]);
        out.push_back(r);
    }
    return out;
}

// ---- ugly sweep -----------------------------------------------------------

std::vector<UglyRecord> run_ugly_sweep(const UglyConfig& config) {
    if (config.d < 2) throw std::invalid_argument("ugly sweep: d must be >= 2");
    const std::size_t r = config.d - 1;
    if (!(config.c > 0.0 && config.c <= 1.0)) throw std::invalid_argument("ugly sweep: c must lie in (0, 1]");
    const Grid grid = Grid::uniform(kEvalNodes);
    std::vector<UglyRecord> out;
    for (std::size_t k : config.k_values) {
        if (k > r) throw std::invalid_argument("ugly sweep: k exceeds d - 1");
        Vector sigma(r, 0.0);
        for (std::size_t i = 0; i < k; ++i) sigma[i] = config.c;
        const SpectralOperator op = SpectralOperator::from_seed(sigma, operator_seed(config.seed));
        const StructuralFunction h0{Vector(r, 1.0 / std::sqrt(static_cast<double>(r))), op};

        UglyRecord rec;
        rec.k = k;
        rec.sigma_value = k > 0 ? op.sigma()[0] : 0.0;
        rec.floor = std::sqrt(1.0 - static_cast<double>(k) / static_cast<double>(r));

        const auto full_phi = std::make_shared<OracleFeatures>(op, Side::X, r);
        const auto full_psi = std::make_shared<OracleFeatures>(op, Side::Z, r);
        rec.population_residual = l2_error(fit_population(full_phi, full_psi, op, h0, grid), h0, grid);

        Rng rng(mix_seed({config.seed, k}));
        const auto pairs = rejection_sample(op, config.n_labeled, rng);
        const auto data = sample_outcomes(op, h0, pairs, config.noise_var, rng);
        const auto phi = std::make_shared<OracleFeatures>(op, Side::X, k);
        const auto psi = std::make_shared<OracleFeatures>(op, Side::Z, k);
        rec.finite_residual = l2_error(fit(phi, psi, data), h0, grid);
        out.push_back(rec);
    }
    return out;
}

void write_ugly_csv(std::ostream& out, std::span<const UglyRecord> records) {
    out << "k,sigma_value,floor,population_residual,finite_sample_residual\n";
    for (const UglyRecord& r : records)
        out << r.k << ',' << num(r.sigma_value) << ',' << num(r.floor) << ',' << num(r.population_residual) << ','
            << num(r.finite_residual) << '\n';
}

// ---- single fit -----------------------------------------------------------

FitSpec read_fit_spec(std::istream& in) {
    FitSpec spec;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const auto where = "scenario: line " + std::to_string(line_no);
        if (eq == std::string::npos) throw std::invalid_argument(where + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        double v = 0.0;
        try {
            v = parse_double(value);
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument(where + ": bad number '" + value + "'");
        }
        const auto count = [&] {
            if (!(v >= 0.0) || v != std::floor(v)) throw std::invalid_argument(where + ": " + key + " must be a count");
            return static_cast<std::size_t>(v);
        };
        if (key == "d") spec.scenario.d = count();
        else if (key == "c_sigma") spec.scenario.c_sigma = v;
        else if (key == "c_alpha") spec.scenario.c_alpha = v;
        else if (key == "sigma_head") spec.scenario.sigma_head = v;
        else if (key == "alpha_norm") spec.scenario.alpha_norm = v;
        else if (key == "noise_var") spec.scenario.noise_var = v;
        else if (key == "seed_op") spec.scenario.seed_op = count();
        else if (key == "seed_data") spec.scenario.seed_data = count();
        else if (key == "n_labeled") spec.n_labeled = count();
        else if (key == "m_unlabeled") spec.m_unlabeled = count();
        else if (key == "k") spec.k = count();
        else if (key == "feature_dim") spec.feature_dim = count();
        else if (key == "epochs") spec.epochs = count();
        else if (key == "batch_size") spec.batch_size = count();
        else if (key == "reg_weight") spec.reg_weight = v;
        else if (key == "relative_ridge") spec.relative_ridge = v;
        else throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
    spec.scenario.validate();
    if (spec.relative_ridge && !(*spec.relative_ridge >= 0.0))
        throw std::invalid_argument("scenario: relative_ridge must be >= 0");
    if (spec.k > spec.scenario.d - 1) throw std::invalid_argument("scenario: k exceeds d - 1");
    return spec;
}

FitOutcome run_fit(const FitSpec& spec, Mode mode) {
    const ScenarioModel model = build_scenario(spec.scenario);
    const std::size_t r = model.op.rank();
    const Grid grid = Grid::uniform(kEvalNodes);
    GridConfig gc;
    gc.m_unlabeled = spec.m_unlabeled;
    gc.feature_dim = spec.feature_dim;
    gc.epochs = spec.epochs;
    gc.batch_size = spec.batch_size;
    gc.reg_weight = spec.reg_weight;
    gc.mode = mode;
    gc.relative_ridge = spec.relative_ridge;

    FitOutcome out;
    DiagnosticsReport& rep = out.report;
    std::shared_ptr<const FeatureMap> phi;
    std::shared_ptr<const FeatureMap> psi;
    if (mode == Mode::Oracle) {
        const std::size_t k = spec.k == 0 ? r : spec.k;
        phi = std::make_shared<OracleFeatures>(model.op, Side::X, k);
        psi = std::make_shared<OracleFeatures>(model.op, Side::Z, k);
        rep.tau = tau_sieve(*phi, model.op, grid);
        rep.tail_norm = tail_norm(model.h0.alpha, k);
        rep.epsilon_hat = kNaN;
        rep.sigma_cut = model.op.sigma()[k - 1];
    } else {
        const auto pair = learn_features(model, gc, mix_seed({spec.scenario.seed_data, kTrainTag}));
        if (!pair) throw TrainingDiverged(0, "fit: contrastive training diverged");
        phi = pair->phi;
        psi = pair->psi;
        rep.tau = pair->tau;
        rep.tail_norm = pair->tail;
        rep.epsilon_hat = pair->eps;
        rep.sigma_cut = model.op.sigma()[std::min(spec.feature_dim, r) - 1];
    }
    rep.zeta = zeta(*phi, *psi).value;
    rep.regime = classify_regime(rep.tail_norm, rep.sigma_cut, rep.thresholds);

    Rng rng(spec.scenario.seed_data);
    const auto pairs = rejection_sample(model.op, spec.n_labeled, rng);
    const auto data = sample_outcomes(model.op, model.h0, pairs, spec.scenario.noise_var, rng);
    const TwoStageFit f = fit_conditioned(phi, psi, data, gc.ridge());
    out.x = grid.nodes;
    out.h0 = model.h0.evaluate(grid.nodes);
    out.h_hat = predict(f, grid.nodes);
    return out;
}

void write_fit_csv(std::ostream& out, const FitOutcome& outcome) {
    out << "x,h0,h_hat\n";
    for (std::size_t a = 0; a < outcome.x.size(); ++a)
        out << num(outcome.x[a]) << ',' << num(outcome.h0[a]) << ',' << num(outcome.h_hat[a]) << '\n';
}

// ---- heatmap --------------------------------------------------------------

Statistic parse_statistic(const std::string& text) {
    if (text == "mean") return Statistic::Mean;
    if (text == "median") return Statistic::Median;
    throw std::invalid_argument("unknown statistic '" + text + "' (expected mean or median)");
}

std::string colormap_hex(double t) {
    static constexpr unsigned char stops[5][3] = {
        {0x44, 0x01, 0x54}, {0x3b, 0x52, 0x8b}, {0x21, 0x91, 0x8c}, {0x5e, 0xc9, 0x62}, {0xfd, 0xe7, 0x25}};
    t = std::clamp(std::isnan(t) ? 0.0 : t, 0.0, 1.0);
    const double pos = t * 4.0;
    const std::size_t i = std::min<std::size_t>(3, static_cast<std::size_t>(pos));
    const double f = pos - static_cast<double>(i);
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

std::string render_heatmap(std::istream& csv, Statistic stat) {
    const std::vector<RunRecord> records = read_run_csv(csv);
    std::map<std::pair<double, double>, Vector> cells;  // (c_sigma, c_alpha) -> mse values
    for (const RunRecord& r : records) {
        auto& v = cells[{r.c_sigma, r.c_alpha}];
        if (std::isfinite(r.mse)) v.push_back(r.mse);
    }
    if (cells.empty()) throw std::invalid_argument("heatmap: no rows");
    Vector alphas;
    Vector sigmas;
    for (const auto& [key, _] : cells) {
        sigmas.push_back(key.first);
        alphas.push_back(key.second);
    }
    std::sort(alphas.begin(), alphas.end());
    alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
    sigmas.erase(std::unique(sigmas.begin(), sigmas.end()), sigmas.end());

    std::map<std::pair<double, double>, double> value;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (auto& [key, v] : cells) {
        double s = kNaN;
        if (!v.empty()) {
            if (stat == Statistic::Mean) {
                s = 0.0;
                for (double x : v) s += x;
                s /= static_cast<double>(v.size());
            } else {
                std::sort(v.begin(), v.end());
                const std::size_t n = v.size();
                s = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
            }
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        value[key] = s;
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;

    constexpr int cw = 90, ch = 60, left = 100, top = 60, legend_h = 80;
    const int width = left + cw * static_cast<int>(alphas.size()) + 20;
    const int height = top + ch * static_cast<int>(sigmas.size()) + legend_h;
    const char* stat_name = stat == Statistic::Mean ? "mean" : "median";
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<text x=\"" << left << "\" y=\"20\">" << stat_name << " mse by (c_alpha, c_sigma)</text>\n";
    svg << "<text x=\"" << left << "\" y=\"40\">c_alpha</text>\n";
    svg << "<text x=\"10\" y=\"" << top - 6 << "\">c_sigma</text>\n";
    for (std::size_t j = 0; j < alphas.size(); ++j)
        svg << "<text x=\"" << left + cw * static_cast<int>(j) + cw / 2 << "\" y=\"" << top - 6
            << "\" text-anchor=\"middle\">" << format_double(alphas[j]) << "</text>\n";
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        const int y = top + ch * static_cast<int>(i);
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"end\">"
            << format_double(sigmas[i]) << "</text>\n";
        for (std::size_t j = 0; j < alphas.size(); ++j) {
            const int x = left + cw * static_cast<int>(j);
            const auto it = value.find({sigmas[i], alphas[j]});
            if (it == value.end()) continue;
            const double v = it->second;
            const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
            const std::string fill = std::isnan(v) ? "#cccccc" : colormap_hex(t);
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\""
                << fill << "\" stroke=\"#ffffff\"/>\n";
            char label[32];
            std::snprintf(label, sizeof label, "%.4g", v);
            svg << "<text x=\"" << x + cw / 2 << "\" y=\"" << y + ch / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
                << (t > 0.6 ? "#000000" : "#ffffff") << "\">" << (std::isnan(v) ? "n/a" : label) << "</text>\n";
        }
    }
    const int ly = top + ch * static_cast<int>(sigmas.size()) + 20;
    constexpr int steps = 20, step_w = 10;
    for (int s = 0; s < steps; ++s)
        svg << "<rect x=\"" << left + s * step_w << "\" y=\"" << ly << "\" width=\"" << step_w
            << "\" height=\"14\" fill=\"" << colormap_hex(static_cast<double>(s) / (steps - 1)) << "\"/>\n";
    svg << "<text x=\"" << left << "\" y=\"" << ly + 32 << "\">min " << format_double(lo) << "</text>\n";
    svg << "<text x=\"" << left + steps * step_w << "\" y=\"" << ly + 32 << "\" text-anchor=\"end\">max "
        << format_double(hi) << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace snpiv
