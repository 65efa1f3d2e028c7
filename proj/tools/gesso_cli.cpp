// Command-line front end: fit, cv, simulate, bench, metrics.
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <CLI11.hpp>
#include <gesso/gesso.hpp>

namespace {

using namespace gesso;
using io::json;

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_nonconverged = 3;
constexpr int exit_io = 4;

struct OutputOptions
{
    std::string out;
    bool pretty = false;
    bool no_timing = false;
};

struct DataOptions
{
    std::string path;
    std::string format;
    bool no_standardize = false;
};

struct SolverOptions
{
    double tol = 1e-4;
    bool absolute_tol = false;
    bool no_screening = false;
    long max_iter = 1000;
};

void add_output(CLI::App* cmd, OutputOptions& o)
{
    cmd->add_option("--out", o.out, "write output to this path instead of stdout");
    cmd->add_flag("--pretty", o.pretty, "human-readable table instead of JSON");
    cmd->add_flag("--no-timing", o.no_timing, "omit wall-clock fields (byte-reproducible output)");
}

void add_data(CLI::App* cmd, DataOptions& d, bool required)
{
    auto* opt = cmd->add_option("--data", d.path, "dataset path (CSV or GESSO1 binary)");
    if (required) opt->required();
    cmd->add_option("--format", d.format, "csv or bin (default: from extension)")->check(CLI::IsMember({"csv", "bin"}));
    cmd->add_flag("--no-standardize", d.no_standardize, "use columns as given");
}

void add_solver(CLI::App* cmd, SolverOptions& s)
{
    cmd->add_option("--tol", s.tol, "duality-gap tolerance (relative to ||y||^2/2n unless --absolute-tol)")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--absolute-tol", s.absolute_tol, "interpret --tol as an absolute gap");
    cmd->add_flag("--no-screening", s.no_screening, "disable Gap-SAFE screening");
    cmd->add_option("--max-iter", s.max_iter, "maximum outer iterations")->check(CLI::PositiveNumber);
}

SolverConfig make_config(const SolverOptions& s)
{
    SolverConfig cfg;
    cfg.tol = s.tol;
    cfg.tol_relative = !s.absolute_tol;
    cfg.use_screening = !s.no_screening;
    cfg.max_iter_outer = s.max_iter;
    cfg.validate();
    return cfg;
}

Dataset load(const DataOptions& d)
{
    const io::Format fmt = d.format.empty() ? io::guess_format(d.path) : io::parse_format(d.format);
    DatasetOptions opts;
    opts.standardize = !d.no_standardize;
    return io::load_dataset(d.path, fmt, opts);
}

void emit(const OutputOptions& o, const std::string& text)
{
    if (o.out.empty()) {
        std::cout << text;
        std::cout.flush();
    } else {
        io::write_text(o.out, text);
    }
}

std::string fits_table(const io::ResultDocument& doc)
{
    std::ostringstream ss;
    ss << std::left << std::setw(14) << "lambda1" << std::setw(14) << "lambda2" << std::setw(8) << "nnz_g"
       << std::setw(8) << "nnz_gxe" << std::setw(14) << "gap" << std::setw(10) << "ws_max" << "converged\n";
    for (const auto& c : doc.fits) {
        ss << std::setw(14) << std::setprecision(6) << c.lambda1 << std::setw(14) << c.lambda2 << std::setw(8)
           << c.beta_g.size() << std::setw(8) << c.beta_gxe.size() << std::setw(14) << c.meta.gap << std::setw(10)
           << c.meta.ws_size_max << (c.meta.converged ? "yes" : "no") << '\n';
    }
    return ss.str();
}

io::ResultDocument base_document(const std::string& command, const Dataset& ds, const SolverConfig& cfg,
                                 const OutputOptions& o)
{
    io::ResultDocument doc;
    doc.command = command;
    doc.solver = cfg;
    doc.n = ds.n();
    doc.p = ds.p();
    doc.standardized = ds.standardized();
    doc.timing = !o.no_timing;
    return doc;
}

io::GridRecord grid_record(const PenaltyGrid& grid)
{
    return io::GridRecord{grid.lambda_max, grid.lambda1_values, grid.lambda2_values};
}

bool all_converged(const io::ResultDocument& doc)
{
    for (const auto& c : doc.fits) {
        if (!c.meta.converged) return false;
    }
    return true;
}

int finish(const io::ResultDocument& doc, const OutputOptions& o)
{
    emit(o, o.pretty ? fits_table(doc) : io::dump(doc));
    if (!all_converged(doc)) {
        std::cerr << "gesso: solver did not reach the gap tolerance\n";
        return exit_nonconverged;
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------

struct FitOptions
{
    DataOptions data;
    SolverOptions solver;
    OutputOptions out;
    std::optional<double> lambda1, lambda2;
    index_t grid = 0;
    double eps_ratio = 0.01;
};

int run_fit(const FitOptions& f)
{
    const Dataset ds = load(f.data);
    const SolverConfig cfg = make_config(f.solver);
    io::ResultDocument doc = base_document("fit", ds, cfg, f.out);
    if (f.grid > 0) {
        const PenaltyGrid grid = build_grid(ds, f.grid, f.grid, f.eps_ratio);
        doc.grid = grid_record(grid);
        const PathResult path = fit_path(ds, grid, cfg);
        for (const auto& c : path.cells) doc.fits.push_back(io::make_cell_record(c.pen, c.coef, c.meta));
    } else {
        const PenaltyPair pen{*f.lambda1, *f.lambda2};
        const FitResult r = fit(ds, pen, cfg);
        doc.fits.push_back(io::make_cell_record(pen, SparseCoefficients::from_dense(r.coefficients), r.meta));
    }
    return finish(doc, f.out);
}

struct CvOptions
{
    DataOptions data;
    SolverOptions solver;
    OutputOptions out;
    int folds = 5;
    int runs = 1;
    std::uint64_t seed = 1;
    index_t grid = 30;
    double eps_ratio = 0.01;
};

int run_cv(const CvOptions& c)
{
    const Dataset ds = load(c.data);
    const SolverConfig cfg = make_config(c.solver);
    if (c.folds < 2 || c.folds > ds.n()) throw value_error("--folds must be between 2 and n");
    io::ResultDocument doc = base_document("cv", ds, cfg, c.out);
    const PenaltyGrid grid = build_grid(ds, c.grid, c.grid, c.eps_ratio);
    doc.grid = grid_record(grid);
    const CvResult cv = cross_validate(ds, grid, c.folds, cfg, c.seed);
    doc.cv = io::CvRecord{c.folds, c.seed, cv.mean_loss, cv.se_loss, cv.best_cell, cv.best_pair.lambda1,
                          cv.best_pair.lambda2};
    const FitResult best = fit(ds, cv.best_pair, cfg);
    doc.fits.push_back(io::make_cell_record(cv.best_pair, SparseCoefficients::from_dense(best.coefficients), best.meta));
    if (c.runs > 1) {
        const SelectionRates rates = selection_rates(ds, grid, c.folds, c.runs, cfg, c.seed);
        io::SelectionRecord sel;
        sel.runs = rates.runs;
        sel.rate_g = io::to_sparse(rates.rate_g, 0.0);
        sel.rate_gxe = io::to_sparse(rates.rate_gxe, 0.0);
        std::vector<index_t> by_rank(rates.rank_gxe.size());
        for (std::size_t i = 0; i < rates.rank_gxe.size(); ++i) by_rank[rates.rank_gxe[i] - 1] = static_cast<index_t>(i);
        sel.top_gxe = std::move(by_rank);
        doc.selection = std::move(sel);
    }
    if (c.out.pretty) {
        std::ostringstream ss;
        ss << "best lambda1 " << cv.best_pair.lambda1 << "  lambda2 " << cv.best_pair.lambda2 << "  cv mse "
           << cv.mean_loss[cv.best_cell] << " (se " << cv.se_loss[cv.best_cell] << ")\n"
           << fits_table(doc);
        emit(c.out, ss.str());
        return all_converged(doc) ? exit_ok : exit_nonconverged;
    }
    return finish(doc, c.out);
}

struct SimulateOptions
{
    SimSpec spec;
    std::string mode = "strong_hierarchical";
    std::string genotype = "normal";
    std::optional<double> beta_g, beta_gxe;
    std::string data_out;
    std::string format;
    std::string truth_out;
    OutputOptions out;
};

int run_simulate(SimulateOptions s)
{
    s.spec.mode = parse_sim_mode(s.mode);
    s.spec.genotype = s.genotype == "binomial" ? GenotypeModel::binomial : GenotypeModel::normal;
    s.spec.beta_g_mag = s.beta_g;
    s.spec.beta_gxe_mag = s.beta_gxe;
    const SimData sim = simulate(s.spec);
    const io::Format fmt = s.format.empty() ? io::guess_format(s.data_out) : io::parse_format(s.format);
    io::write_raw(s.data_out, sim.data, fmt);
    const std::string truth = io::truth_to_json(sim.truth, s.spec).dump(2) + "\n";
    if (!s.truth_out.empty()) io::write_text(s.truth_out, truth);
    if (s.out.pretty) {
        std::ostringstream ss;
        ss << "mode " << to_string(sim.truth.mode) << "  n " << s.spec.n << "  p " << s.spec.p << "  snr "
           << sim.truth.realized_snr << "\nmain support:";
        for (const index_t i : sim.truth.main_support) ss << ' ' << i;
        ss << "\ninteraction support:";
        for (const index_t i : sim.truth.interaction_support) ss << ' ' << i;
        ss << '\n';
        emit(s.out, ss.str());
    } else {
        emit(s.out, truth);
    }
    return exit_ok;
}

struct BenchOptions
{
    DataOptions data;
    SolverOptions solver;
    OutputOptions out;
    SimSpec spec;
    int reps = 3;
    double lambda_frac = 0.1;
};

int run_bench(BenchOptions b)
{
    Dataset ds = [&] {
        if (!b.data.path.empty()) return load(b.data);
        return Dataset::from_raw(simulate(b.spec).data, DatasetOptions{});
    }();
    const SolverConfig base = make_config(b.solver);
    const double top = lambda_max(ds);
    const PenaltyPair pen{b.lambda_frac * top, b.lambda_frac * top};
    json rows = json::array();
    bool ok = true;
    std::ostringstream table;
    table << std::left << std::setw(10) << "variant" << std::setw(14) << "mean_sec" << std::setw(14) << "min_sec"
          << std::setw(14) << "gap" << std::setw(8) << "nnz" << "converged\n";
    for (const auto& [name, cfg] : solver_variants(base)) {
        std::vector<double> times;
        FitResult last;
        for (int r = 0; r < b.reps; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            last = fit(ds, pen, cfg);
            times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        const double mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
        const double mn = *std::min_element(times.begin(), times.end());
        index_t nnz = 0;
        for (index_t i = 0; i < ds.p(); ++i) nnz += last.coefficients.block_nonzero(i);
        ok = ok && last.meta.converged;
        json row{{"variant", name}, {"reps", b.reps}, {"gap", last.meta.gap}, {"tol_gap", last.meta.tol_gap},
                 {"nonzero_blocks", nnz}, {"converged", last.meta.converged}};
        if (!b.out.no_timing) {
            row["mean_seconds"] = mean;
            row["min_seconds"] = mn;
        }
        rows.push_back(std::move(row));
        table << std::setw(10) << name << std::setw(14) << mean << std::setw(14) << mn << std::setw(14)
              << last.meta.gap << std::setw(8) << nnz << (last.meta.converged ? "yes" : "no") << '\n';
    }
    const json doc{{"schema_version", io::schema_version},
                   {"command", "bench"},
                   {"n", ds.n()},
                   {"p", ds.p()},
                   {"lambda1", pen.lambda1},
                   {"lambda2", pen.lambda2},
                   {"rows", rows}};
    emit(b.out, b.out.pretty ? table.str() : doc.dump(2) + "\n");
    return ok ? exit_ok : exit_nonconverged;
}

struct MetricsOptions
{
    std::string truth;
    std::string result;
    std::string ranking = "entry";
    std::size_t cell = 0;
    OutputOptions out;
};

int run_metrics(const MetricsOptions& m)
{
    json truth_json;
    try {
        truth_json = json::parse(io::read_text(m.truth));
    } catch (const json::exception& e) {
        throw io_error(std::string("truth document: ") + e.what());
    }
    const auto [truth, p] = io::truth_from_json(truth_json);
    const io::ResultDocument doc = io::parse_document(io::read_text(m.result));
    if (doc.p != p) throw dimension_error("result and truth disagree on p");
    if (doc.fits.empty()) throw value_error("result document has no fits");
    std::vector<index_t> ranking;
    if (m.ranking == "entry") {
        std::vector<SparseCoefficients> fits;
        for (const auto& c : doc.fits) fits.push_back(io::to_sparse_coefficients(c));
        ranking = interaction_entry_order(fits, p);
    } else {
        if (m.cell >= doc.fits.size()) throw value_error("--cell out of range");
        ranking = interaction_magnitude_order(io::to_sparse_coefficients(doc.fits[m.cell]));
    }
    const SelectionMetrics sm = selection_metrics(ranking, truth, p);
    if (m.out.pretty) {
        std::ostringstream ss;
        ss << "auc_gxe " << sm.auc_gxe << "  discovered " << sm.discovered << "\nk  precision\n";
        for (std::size_t k = 0; k < sm.precision_at_k.size(); ++k) ss << (k + 1) << "  " << sm.precision_at_k[k] << '\n';
        emit(m.out, ss.str());
    } else {
        const json out{{"schema_version", io::schema_version},
                       {"command", "metrics"},
                       {"ranking", m.ranking},
                       {"auc_gxe", sm.auc_gxe},
                       {"discovered", sm.discovered},
                       {"precision_at_k", sm.precision_at_k}};
        emit(m.out, out.dump(2) + "\n");
    }
    return exit_ok;
}

void add_sim_flags(CLI::App* cmd, SimSpec& spec)
{
    cmd->add_option("--n", spec.n, "observations")->check(CLI::PositiveNumber);
    cmd->add_option("--p", spec.p, "predictors")->check(CLI::PositiveNumber);
    cmd->add_option("--p-g", spec.p_g, "nonzero main effects")->check(CLI::NonNegativeNumber);
    cmd->add_option("--p-gxe", spec.p_gxe, "nonzero interactions")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", spec.seed, "random seed");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"gesso: hierarchical lasso for main effects and exposure interactions"};
    app.require_subcommand(1);

    FitOptions fit_opts;
    auto* fit_cmd = app.add_subcommand("fit", "fit one penalty pair or a penalty grid");
    add_data(fit_cmd, fit_opts.data, true);
    add_solver(fit_cmd, fit_opts.solver);
    add_output(fit_cmd, fit_opts.out);
    auto* l1 = fit_cmd->add_option("--lambda1", fit_opts.lambda1, "group penalty")->check(CLI::PositiveNumber);
    auto* l2 = fit_cmd->add_option("--lambda2", fit_opts.lambda2, "interaction penalty")->check(CLI::PositiveNumber);
    auto* grid_opt = fit_cmd->add_option("--grid", fit_opts.grid, "fit an N x N grid")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--eps-ratio", fit_opts.eps_ratio, "smallest grid value relative to lambda_max")
        ->check(CLI::Range(1e-12, 1.0));
    l1->needs(l2);
    l2->needs(l1);
    grid_opt->excludes(l1)->excludes(l2);

    CvOptions cv_opts;
    auto* cv_cmd = app.add_subcommand("cv", "cross-validate over a penalty grid");
    add_data(cv_cmd, cv_opts.data, true);
    add_solver(cv_cmd, cv_opts.solver);
    add_output(cv_cmd, cv_opts.out);
    cv_cmd->add_option("--folds", cv_opts.folds, "number of folds");
    cv_cmd->add_option("--runs", cv_opts.runs, "repeated CV runs for selection rates")->check(CLI::PositiveNumber);
    cv_cmd->add_option("--seed", cv_opts.seed, "fold assignment seed");
    cv_cmd->add_option("--grid", cv_opts.grid, "grid points per penalty")->check(CLI::PositiveNumber);
    cv_cmd->add_option("--eps-ratio", cv_opts.eps_ratio, "smallest grid value relative to lambda_max")
        ->check(CLI::Range(1e-12, 1.0));

    SimulateOptions sim_opts;
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset and its truth");
    add_sim_flags(sim_cmd, sim_opts.spec);
    add_output(sim_cmd, sim_opts.out);
    sim_cmd->add_option("--mode", sim_opts.mode, "strong_hierarchical, hierarchical or anti_hierarchical");
    sim_cmd->add_option("--beta-g", sim_opts.beta_g, "main-effect magnitude (mode default if omitted)");
    sim_cmd->add_option("--beta-gxe", sim_opts.beta_gxe, "interaction magnitude (mode default if omitted)");
    sim_cmd->add_option("--beta-e", sim_opts.spec.beta_e, "exposure coefficient");
    sim_cmd->add_option("--prevalence", sim_opts.spec.e_prevalence, "exposure prevalence");
    sim_cmd->add_option("--snr", sim_opts.spec.target_snr, "interaction signal-to-noise ratio");
    sim_cmd->add_option("--genotype", sim_opts.genotype, "normal or binomial")
        ->check(CLI::IsMember({"normal", "binomial"}));
    sim_cmd->add_option("--maf", sim_opts.spec.maf, "minor allele frequency for binomial genotypes");
    sim_cmd->add_option("--data-out", sim_opts.data_out, "dataset output path")->required();
    sim_cmd->add_option("--format", sim_opts.format, "csv or bin (default: from extension)")
        ->check(CLI::IsMember({"csv", "bin"}));
    sim_cmd->add_option("--truth-out", sim_opts.truth_out, "truth JSON output path");

    BenchOptions bench_opts;
    bench_opts.spec.n = 200;
    bench_opts.spec.p = 10000;
    bench_opts.spec.p_g = 15;
    bench_opts.spec.p_gxe = 10;
    auto* bench_cmd = app.add_subcommand("bench", "time the four solver variants on one penalty pair");
    add_data(bench_cmd, bench_opts.data, false);
    add_solver(bench_cmd, bench_opts.solver);
    add_output(bench_cmd, bench_opts.out);
    add_sim_flags(bench_cmd, bench_opts.spec);
    bench_cmd->add_option("--reps", bench_opts.reps, "repetitions per variant")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--lambda-frac", bench_opts.lambda_frac, "lambda1 = lambda2 = frac * lambda_max")
        ->check(CLI::Range(1e-6, 1.0));

    MetricsOptions metrics_opts;
    auto* metrics_cmd = app.add_subcommand("metrics", "interaction AUC and precision from a truth and a result");
    metrics_cmd->add_option("--truth", metrics_opts.truth, "truth JSON from simulate")->required();
    metrics_cmd->add_option("--result", metrics_opts.result, "result JSON from fit or cv")->required();
    metrics_cmd->add_option("--ranking", metrics_opts.ranking, "entry (path order) or magnitude (single cell)")
        ->check(CLI::IsMember({"entry", "magnitude"}));
    metrics_cmd->add_option("--cell", metrics_opts.cell, "fit index for magnitude ranking");
    add_output(metrics_cmd, metrics_opts.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (*fit_cmd) {
            if (!fit_opts.grid && !fit_opts.lambda1) {
                std::cerr << "fit: need --lambda1/--lambda2 or --grid\n" << fit_cmd->help();
                return exit_usage;
            }
            return run_fit(fit_opts);
        }
        if (*cv_cmd) return run_cv(cv_opts);
        if (*sim_cmd) return run_simulate(sim_opts);
        if (*bench_cmd) return run_bench(bench_opts);
        if (*metrics_cmd) return run_metrics(metrics_opts);
    } catch (const io_error& e) {
        std::cerr << "gesso: " << e.what() << '\n';
        return exit_io;
    } catch (const gesso_error& e) {
        std::cerr << "gesso: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
