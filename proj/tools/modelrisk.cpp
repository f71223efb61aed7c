// Batch command-line front end: simulation, joint estimation, pricing,
// model-risk decomposition, model comparison, and the regression/diagnostic
// report tables, all driven by flat config and CSV files.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modelrisk/diagnostics.hpp"
#include "modelrisk/mcmc.hpp"
#include "modelrisk/models.hpp"
#include "modelrisk/pipeline.hpp"
#include "modelrisk/pricing.hpp"
#include "modelrisk/riskmeasure.hpp"
#include "modelrisk/simulation.hpp"

namespace fs = std::filesystem;
using namespace modelrisk;

namespace {

std::string out_path(const std::string& out_dir, const std::string& name) {
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
}

std::vector<double> numeric_column(const CsvTable& t, const std::string& name) {
    const int idx = t.require_column(name);
    std::vector<double> col;
    col.reserve(t.rows.size());
    for (const auto& row : t.rows) col.push_back(csv_cell_double(row[idx], name));
    return col;
}

MarketSeries load_market(const std::string& market_csv, const std::string& spot_csv,
                         const std::string& options_csv, const std::string& rates_csv) {
    if (!market_csv.empty()) return market_series_from_csv(read_text_file(market_csv));
    if (spot_csv.empty() || options_csv.empty() || rates_csv.empty())
        throw std::invalid_argument("need --data, or all of --spot/--options/--rates");
    return ingest(read_text_file(spot_csv), read_text_file(options_csv),
                  read_text_file(rates_csv));
}

// --- simulate ---------------------------------------------------------------

int cmd_simulate(const std::string& config, std::uint64_t seed, const std::string& out_dir,
                 int n_days, bool with_options, double rate) {
    const ModelSpec spec = model_spec_from_config(parse_config(read_text_file(config)));
    PathConfig pc;
    pc.n_days = n_days;
    pc.seed = seed;
    pc.with_options = with_options;
    const SimulatedDataset ds =
        simulate(spec, pc, std::vector<double>(static_cast<std::size_t>(n_days) + 1, rate));

    CsvTable t;
    t.header = {"date_index", "Y", "V", "JY", "JV", "C", "r"};
    for (int i = 0; i <= n_days; ++i) {
        char date[16];
        std::snprintf(date, sizeof(date), "d%06d", i);
        const double jy = i < n_days ? ds.JY[i] : 0.0;
        const double jv = i < n_days ? ds.JV[i] : 0.0;
        const double c = with_options ? ds.C[i] : 0.0;
        t.rows.push_back({date, detail::format_double(ds.Y[i]), detail::format_double(ds.V[i]),
                          detail::format_double(jy), detail::format_double(jv),
                          detail::format_double(c), detail::format_double(ds.r[i])});
    }
    write_text_file(out_path(out_dir, "simulated.csv"), to_csv(t));
    write_text_file(out_path(out_dir, "spec_echo.cfg"), model_spec_to_config(spec));
    std::cout << "wrote " << n_days + 1 << " days to " << out_dir << "/simulated.csv\n";
    return 0;
}

// --- estimate ---------------------------------------------------------------

int cmd_estimate(const std::string& config, const std::string& priors_path,
                 const MarketSeries& market, std::uint64_t seed, const std::string& out_dir,
                 long n_iter, long n_burnin, int thin) {
    const ModelSpec spec0 = model_spec_from_config(parse_config(read_text_file(config)));
    PriorSet priors = PriorSet::defaults();
    if (!priors_path.empty())
        priors = prior_set_from_config(parse_config(read_text_file(priors_path)));

    EstimationData data;
    data.Y = market.Y;
    data.r = market.r;
    data.C = market.C;
    ChainConfig cfg;
    cfg.n_iter = static_cast<int>(n_iter);
    cfg.n_burnin = static_cast<int>(n_burnin);
    cfg.thin = thin;
    cfg.seed = seed;
    const PosteriorDraws post = run_chain(spec0, data, priors, cfg);
    const auto files = write_estimation_artifacts(out_dir, spec0, post, market.dates);
    for (const auto& f : files) std::cout << "wrote " << f << "\n";
    for (const auto& w : post.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

// --- price ------------------------------------------------------------------

int cmd_price(const std::string& config, const std::string& data_csv,
              const std::string& out_dir) {
    const ModelSpec spec = model_spec_from_config(parse_config(read_text_file(config)));
    const CsvTable in = parse_csv(read_text_file(data_csv));
    const int c_date = in.require_column("date");
    const auto spot = numeric_column(in, "spot"), rate = numeric_column(in, "rate"),
               strike = numeric_column(in, "strike"), tau = numeric_column(in, "tau");
    const int c_v = in.column("v"); // optional starting variance, else theta
    CsvTable out;
    out.header = {"date", "model_price", "quad_error"};
    for (std::size_t i = 0; i < in.rows.size(); ++i) {
        PricingInputs pin;
        pin.Y0 = std::log(spot[i]);
        pin.r = rate[i];
        pin.K = strike[i];
        pin.tau = tau[i];
        pin.V0 = c_v >= 0 ? csv_cell_double(in.rows[i][c_v], "v") : spec.diffusion.theta;
        const PriceResult res = price_call_with_error(spec, pin);
        out.rows.push_back({in.rows[i][c_date], detail::format_double(res.price),
                            detail::format_double(res.quad_error)});
    }
    write_text_file(out_path(out_dir, "prices.csv"), to_csv(out));
    std::cout << "wrote " << out.rows.size() << " prices to " << out_dir << "/prices.csv\n";
    return 0;
}

// --- risk -------------------------------------------------------------------

int cmd_risk(const std::string& draws_path, const MarketSeries& market,
             const std::string& out_dir, double eta, bool svg) {
    const auto by_day = read_price_draws(draws_path);
    if (by_day.size() != market.size())
        throw std::invalid_argument("risk: price draws cover " + std::to_string(by_day.size()) +
                                    " days but market has " + std::to_string(market.size()));
    if (!market.has_options()) throw std::invalid_argument("risk: market data has no prices");
    const RiskReport rep = risk_series(by_day, market.C, eta);
    write_text_file(out_path(out_dir, "risk.csv"), risk_report_to_csv(rep, market.dates));
    if (svg) write_text_file(out_path(out_dir, "risk.svg"), risk_report_to_svg(rep));
    std::cout << "wrote risk decomposition for " << rep.days.size() << " days to " << out_dir
              << "/risk.csv\n";
    return 0;
}

// --- compare ----------------------------------------------------------------

std::vector<double> total_logliks(const std::string& run_dir) {
    const CsvTable t = parse_csv(read_text_file((fs::path(run_dir) / "logliks.csv").string()));
    const auto ret = numeric_column(t, "loglik_returns");
    const auto opt = numeric_column(t, "loglik_options");
    std::vector<double> total(ret.size());
    for (std::size_t i = 0; i < ret.size(); ++i) total[i] = ret[i] + opt[i];
    return total;
}

std::vector<double> mean_price_path(const std::string& run_dir) {
    const auto by_day = read_price_draws((fs::path(run_dir) / "price_draws.bin").string());
    std::vector<double> mean(by_day.size(), 0.0);
    for (std::size_t t = 0; t < by_day.size(); ++t) {
        for (double x : by_day[t]) mean[t] += x;
        mean[t] /= static_cast<double>(by_day[t].size());
    }
    return mean;
}

int cmd_compare(const std::string& run_a, const std::string& run_b,
                const std::string& market_csv, const std::string& out_dir) {
    CsvTable out;
    out.header = {"metric", "value"};
    const auto add = [&](const std::string& name, double v) {
        out.rows.push_back({name, detail::format_double(v)});
    };
    for (const auto& [tag, dir] : {std::pair{"a", run_a}, {"b", run_b}}) {
        const CsvTable d = parse_csv(read_text_file((fs::path(dir) / "dic.csv").string()));
        add(std::string("dic_") + tag, csv_cell_double(d.rows.at(0).at(0), "dic"));
        add(std::string("p_d_") + tag, csv_cell_double(d.rows.at(0).at(2), "p_d"));
    }
    const LogBayesFactor bf = log_bayes_factor_detail(total_logliks(run_a), total_logliks(run_b));
    add("log_bf_ab", bf.value);
    add("log_bf_unstable", bf.unstable ? 1.0 : 0.0);

    if (!market_csv.empty()) {
        const MarketSeries market = market_series_from_csv(read_text_file(market_csv));
        const auto fa = mean_price_path(run_a), fb = mean_price_path(run_b);
        if (fa.size() != market.size() || fb.size() != market.size())
            throw std::invalid_argument("compare: price draw day counts do not match market");
        std::vector<double> loss_a(market.size()), loss_b(market.size()), adj(market.size());
        for (std::size_t t = 0; t < market.size(); ++t) {
            const double ea = market.C[t] - fa[t], eb = market.C[t] - fb[t];
            loss_a[t] = ea * ea;
            loss_b[t] = eb * eb;
            adj[t] = (fa[t] - fb[t]) * (fa[t] - fb[t]);
        }
        const TestResult dm = dm_test(loss_a, loss_b);
        add("dm_stat", dm.statistic);
        add("dm_pvalue", dm.pvalue);
        const TestResult cw = cw_test(loss_a, loss_b, adj);
        add("cw_stat", cw.statistic);
        add("cw_pvalue", cw.pvalue);
    }
    write_text_file(out_path(out_dir, "compare.csv"), to_csv(out));
    std::cout << "wrote " << out.rows.size() << " metrics to " << out_dir << "/compare.csv\n";
    return 0;
}

// --- residual-tests ---------------------------------------------------------

int cmd_residual_tests(const std::string& config, const MarketSeries& market,
                       const std::string& latents_csv, const std::string& out_dir,
                       std::uint64_t seed) {
    const ModelSpec spec = model_spec_from_config(parse_config(read_text_file(config)));
    const CsvTable lat = parse_csv(read_text_file(latents_csv));
    std::vector<double> V = numeric_column(lat, "v_mean");
    std::vector<double> JY = numeric_column(lat, "jy_mean");
    std::vector<double> JV = numeric_column(lat, "jv_mean");
    if (V.size() != market.size())
        throw std::invalid_argument("residual-tests: latents cover " + std::to_string(V.size()) +
                                    " days but market has " + std::to_string(market.size()));
    JY.resize(V.size() - 1);
    JV.resize(V.size() - 1);
    const ResidualSeries res = compute_residuals(spec, market.Y, market.r, V, JY, JV);
    CsvTable out;
    out.header = {"series", "n", "ks_stat", "ks_pvalue", "abadie_pvalue"};
    const auto add = [&](const std::string& name, const std::vector<double>& x) {
        if (x.size() < 20) return;
        const TestResult ks = ks_test(x);
        const double ab = abadie_pvalue(x, 1000, seed ^ 0xabad1eull);
        out.rows.push_back({name, std::to_string(x.size()), detail::format_double(ks.statistic),
                            detail::format_double(ks.pvalue), detail::format_double(ab)});
    };
    add("return_residuals", res.return_residuals);
    add("vol_residuals", res.vol_residuals);
    write_text_file(out_path(out_dir, "residual_tests.csv"), to_csv(out));
    std::cout << "wrote " << out.rows.size() << " test rows to " << out_dir
              << "/residual_tests.csv\n";
    return 0;
}

// --- segment ----------------------------------------------------------------

int cmd_segment(const std::string& data_csv, const std::string& column,
                const std::string& out_dir, double penalty) {
    const CsvTable in = parse_csv(read_text_file(data_csv));
    const auto series = numeric_column(in, column);
    const Segmentation seg = detect_change_points(series, penalty);
    CsvTable out;
    out.header = {"segment", "start_index", "mean", "std"};
    for (std::size_t s = 0; s < seg.segment_means.size(); ++s) {
        const std::size_t start = s == 0 ? 0 : seg.change_points[s - 1];
        out.rows.push_back({std::to_string(s), std::to_string(start),
                            detail::format_double(seg.segment_means[s]),
                            detail::format_double(seg.segment_stds[s])});
    }
    write_text_file(out_path(out_dir, "segments.csv"), to_csv(out));
    std::cout << "wrote " << out.rows.size() << " segments (penalty "
              << detail::format_double(seg.penalty) << ") to " << out_dir << "/segments.csv\n";
    return 0;
}

// --- regress ----------------------------------------------------------------

int cmd_regress(const std::string& data_csv, const std::string& y_name,
                const std::string& out_dir) {
    const CsvTable in = parse_csv(read_text_file(data_csv));
    std::map<std::string, std::vector<double>> columns;
    for (const auto& name : in.header)
        if (name != "date" && name != "date_index") columns[name] = numeric_column(in, name);
    const FeatureMatrix features = build_forecast_features(columns);
    auto it = columns.find(y_name);
    if (it == columns.end())
        throw std::invalid_argument("regress: missing target column " + y_name);
    // Feature rows start at t = 1 (differenced regressors), so the target is
    // aligned by dropping its first observation.
    std::vector<double> y(it->second.begin() + 1, it->second.end());
    const RegressionResult reg = ols(y, features.rows);
    CsvTable out;
    out.header = {"name", "coefficient", "std_error", "pvalue"};
    for (std::size_t j = 0; j < features.names.size(); ++j)
        out.rows.push_back({features.names[j], detail::format_double(reg.coefficients[j]),
                            detail::format_double(reg.std_errors[j]),
                            detail::format_double(reg.pvalues[j])});
    out.rows.push_back({"r2", detail::format_double(reg.r2), "", ""});
    out.rows.push_back({"adj_r2", detail::format_double(reg.adj_r2), "", ""});
    write_text_file(out_path(out_dir, "regression.csv"), to_csv(out));
    std::cout << "wrote " << features.names.size() << " coefficients to " << out_dir
              << "/regression.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-time option-model estimation and model-risk toolkit"};
    app.require_subcommand(1);

    std::string config, out_dir = ".", data_csv, spot_csv, options_csv, rates_csv;
    std::uint64_t seed = 1;

    auto* sim = app.add_subcommand("simulate", "Simulate a synthetic dataset from a model spec");
    int sim_days = 252;
    bool sim_options = false;
    double sim_rate = 0.02;
    sim->add_option("--config", config, "Model spec config file")->required();
    sim->add_option("--seed", seed, "RNG seed");
    sim->add_option("--out-dir", out_dir, "Output directory");
    sim->add_option("--days", sim_days, "Number of trading days");
    sim->add_flag("--with-options", sim_options, "Also simulate daily ATM option prices");
    sim->add_option("--rate", sim_rate, "Constant risk-free rate");

    auto* est = app.add_subcommand("estimate", "Run the MCMC chain on market data");
    std::string priors_path;
    long n_iter = 30000, n_burnin = 10000;
    int thin = 1;
    est->add_option("--config", config, "Initial model spec config")->required();
    est->add_option("--priors", priors_path, "Prior overrides config");
    est->add_option("--data", data_csv, "Aligned market CSV (date,Y[,C],r)");
    est->add_option("--spot", spot_csv, "Raw spot CSV");
    est->add_option("--options", options_csv, "Raw options CSV");
    est->add_option("--rates", rates_csv, "Raw rates CSV");
    est->add_option("--seed", seed, "RNG seed");
    est->add_option("--out-dir", out_dir, "Output directory");
    est->add_option("--iters", n_iter, "Total iterations");
    est->add_option("--burnin", n_burnin, "Burn-in iterations");
    est->add_option("--thin", thin, "Thinning stride");

    auto* price = app.add_subcommand("price", "Price European calls from a spec");
    price->add_option("--config", config, "Model spec config file")->required();
    price->add_option("--data", data_csv, "Pricing grid CSV (date,spot,rate,strike,tau[,v])")
        ->required();
    price->add_option("--out-dir", out_dir, "Output directory");

    auto* risk = app.add_subcommand("risk", "Model-risk decomposition from saved price draws");
    std::string draws_path;
    double eta = 0.05;
    bool svg = false;
    risk->add_option("--draws", draws_path, "price_draws.bin from an estimate run")->required();
    risk->add_option("--data", data_csv, "Aligned market CSV");
    risk->add_option("--spot", spot_csv, "Raw spot CSV");
    risk->add_option("--options", options_csv, "Raw options CSV");
    risk->add_option("--rates", rates_csv, "Raw rates CSV");
    risk->add_option("--out-dir", out_dir, "Output directory");
    risk->add_option("--eta", eta, "Expected-shortfall tail level");
    risk->add_flag("--svg", svg, "Also write a bar-chart SVG");

    auto* cmp = app.add_subcommand("compare", "DIC, Bayes factor, and DM/CW across two runs");
    std::string run_a, run_b;
    cmp->add_option("--run-a", run_a, "First estimate output directory")->required();
    cmp->add_option("--run-b", run_b, "Second estimate output directory")->required();
    cmp->add_option("--data", data_csv, "Aligned market CSV for DM/CW pricing-error tests");
    cmp->add_option("--out-dir", out_dir, "Output directory");

    auto* resid = app.add_subcommand("residual-tests", "KS and Abadie tests on model residuals");
    std::string latents_csv;
    resid->add_option("--config", config, "Posterior-mean spec config")->required();
    resid->add_option("--latents", latents_csv, "latents.csv from an estimate run")->required();
    resid->add_option("--data", data_csv, "Aligned market CSV");
    resid->add_option("--spot", spot_csv, "Raw spot CSV");
    resid->add_option("--options", options_csv, "Raw options CSV");
    resid->add_option("--rates", rates_csv, "Raw rates CSV");
    resid->add_option("--seed", seed, "Bootstrap RNG seed");
    resid->add_option("--out-dir", out_dir, "Output directory");

    auto* seg = app.add_subcommand("segment", "Change-point segmentation of a CSV column");
    std::string seg_column;
    double penalty = -1.0;
    seg->add_option("--data", data_csv, "Input CSV")->required();
    seg->add_option("--column", seg_column, "Column to segment")->required();
    seg->add_option("--penalty", penalty, "PELT penalty (default 2 var log n)");
    seg->add_option("--out-dir", out_dir, "Output directory");

    auto* reg = app.add_subcommand("regress", "Forecast regression with White standard errors");
    std::string y_name;
    reg->add_option("--data", data_csv, "Feature CSV")->required();
    reg->add_option("--y", y_name, "Target column")->required();
    reg->add_option("--out-dir", out_dir, "Output directory");

    auto* run = app.add_subcommand("run", "Execute a full manifest-driven pipeline");
    std::string manifest_path;
    run->add_option("--manifest", manifest_path, "Run manifest config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return cmd_simulate(config, seed, out_dir, sim_days, sim_options, sim_rate);
        if (est->parsed())
            return cmd_estimate(config, priors_path,
                                load_market(data_csv, spot_csv, options_csv, rates_csv), seed,
                                out_dir, n_iter, n_burnin, thin);
        if (price->parsed()) return cmd_price(config, data_csv, out_dir);
        if (risk->parsed())
            return cmd_risk(draws_path, load_market(data_csv, spot_csv, options_csv, rates_csv),
                            out_dir, eta, svg);
        if (cmp->parsed()) return cmd_compare(run_a, run_b, data_csv, out_dir);
        if (resid->parsed())
            return cmd_residual_tests(config,
                                      load_market(data_csv, spot_csv, options_csv, rates_csv),
                                      latents_csv, out_dir, seed);
        if (seg->parsed()) return cmd_segment(data_csv, seg_column, out_dir, penalty);
        if (reg->parsed()) return cmd_regress(data_csv, y_name, out_dir);
        if (run->parsed()) {
            const RunManifest manifest =
                manifest_from_config(parse_config(read_text_file(manifest_path)));
            const auto errs = manifest.errors();
            if (!errs.empty()) {
                for (const auto& e : errs) std::cerr << "error: " << e << "\n";
                return 1;
            }
            const PipelineArtifacts art = run_pipeline(manifest);
            for (const auto& f : art.files) std::cout << "wrote " << f << "\n";
            for (const auto& line : art.log) std::cout << line << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
