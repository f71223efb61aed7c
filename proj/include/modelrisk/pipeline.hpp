// Data ingestion, CSV/binary artifact IO, run manifests, and the pipeline
// orchestrating estimate -> risk -> diagnostics into flat-file reports.
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "modelrisk/diagnostics.hpp"
#include "modelrisk/mcmc.hpp"
#include "modelrisk/models.hpp"
#include "modelrisk/riskmeasure.hpp"

namespace modelrisk {

// ---------------------------------------------------------------------------
// Plain CSV tables: comma-separated, first row is the header, no quoting.
// Parsing then re-serializing a well-formed table is byte-identical.
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
    int require_column(const std::string& name) const {
        const int i = column(name);
        if (i < 0) throw std::invalid_argument("csv: missing required column " + name);
        return i;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size())
                throw std::invalid_argument("csv: row has " + std::to_string(cells.size()) +
                                            " cells, header has " +
                                            std::to_string(t.header.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    if (first) throw std::invalid_argument("csv: empty input");
    return t;
}

inline std::string to_csv(const CsvTable& t) {
    std::ostringstream out;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        out << (i ? "," : "") << t.header[i];
    out << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
    return out.str();
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline bool csv_cell_empty(const std::string& cell) {
    return cell.find_first_not_of(" \t") == std::string::npos;
}

/// Parse a numeric cell; returns NaN for an empty cell, throws on garbage.
inline double csv_cell_double(const std::string& cell, const std::string& context) {
    if (csv_cell_empty(cell)) return std::numeric_limits<double>::quiet_NaN();
    std::size_t pos = 0;
    double x;
    try {
        x = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("csv: bad numeric value '" + cell + "' in " + context);
    }
    while (pos < cell.size() && (cell[pos] == ' ' || cell[pos] == '\t')) ++pos;
    if (pos != cell.size())
        throw std::invalid_argument("csv: bad numeric value '" + cell + "' in " + context);
    return x;
}

// ---------------------------------------------------------------------------
// MarketSeries: the aligned daily series every stage consumes.
// ---------------------------------------------------------------------------

struct MarketSeries {
    std::vector<std::string> dates; // ISO-8601, strictly increasing
    std::vector<double> Y;          // log spot
    std::vector<double> C;          // option market price (index points); empty if absent
    std::vector<double> r;          // continuously compounded annualized rate
    // Optional per-day extras (NaN where the source cell was empty).
    std::vector<double> implied_vol, strike, tau_days, delta, gamma, theta,
        call_volume, put_volume, put_price;
    int dropped_rows = 0;
    std::vector<std::string> log;

    std::size_t size() const { return dates.size(); }
    bool has_options() const { return !C.empty(); }

    void validate() const {
        if (dates.empty()) throw std::invalid_argument("market series: empty");
        if (Y.size() != dates.size() || r.size() != dates.size())
            throw std::invalid_argument("market series: column length mismatch");
        if (!C.empty() && C.size() != dates.size())
            throw std::invalid_argument("market series: option column length mismatch");
        for (std::size_t i = 1; i < dates.size(); ++i)
            if (!(dates[i - 1] < dates[i]))
                throw std::invalid_argument("market series: dates not strictly increasing at " +
                                            dates[i]);
        for (double c : C)
            if (!(c > 0.0))
                throw std::invalid_argument("market series: non-positive option price");
    }
};

namespace pipedetail {

/// Percent yield to continuous compounding on an actual/365 basis.
inline double continuous_rate(double percent, double tau_years) {
    return std::log1p(percent / 100.0 * tau_years) / tau_years;
}

} // namespace pipedetail

/// Inner join of the three raw sources on date. Rows with a missing or
/// unusable required field are dropped with a logged reason. The one-month
/// rate is primary; an empty one-month cell falls back to the three-month
/// column (the splice rule: the fallback column carries the early sample).
inline MarketSeries ingest(const std::string& spot_csv, const std::string& option_csv,
                           const std::string& rates_csv) {
    const CsvTable spot = parse_csv(spot_csv);
    const CsvTable opt = parse_csv(option_csv);
    const CsvTable rates = parse_csv(rates_csv);

    const int s_date = spot.require_column("date"), s_close = spot.require_column("close");
    const int o_date = opt.require_column("date"), o_price = opt.require_column("price");
    const int r_date = rates.require_column("date");
    const int r_1m = rates.require_column("rate_1m"), r_3m = rates.require_column("rate_3m");

    std::map<std::string, const std::vector<std::string>*> opt_by_date, rate_by_date;
    for (const auto& row : opt.rows) opt_by_date[row[o_date]] = &row;
    for (const auto& row : rates.rows) rate_by_date[row[r_date]] = &row;

    const auto opt_extra = [&](const char* name) { return opt.column(name); };
    const int o_iv = opt_extra("implied_vol"), o_strike = opt_extra("strike"),
              o_tau = opt_extra("tau_days"), o_delta = opt_extra("delta"),
              o_gamma = opt_extra("gamma"), o_theta = opt_extra("theta"),
              o_cv = opt_extra("call_volume"), o_pv = opt_extra("put_volume"),
              o_pp = opt_extra("put_price");

    MarketSeries m;
    std::string prev_date;
    for (const auto& row : spot.rows) {
        const std::string& date = row[s_date];
        if (!prev_date.empty() && !(prev_date < date))
            throw std::invalid_argument("ingest: spot dates not strictly increasing at " + date);
        prev_date = date;

        const auto drop = [&](const std::string& why) {
            ++m.dropped_rows;
            m.log.push_back("dropped " + date + ": " + why);
        };
        const auto o_it = opt_by_date.find(date);
        if (o_it == opt_by_date.end()) {
            drop("no option row");
            continue;
        }
        const auto q_it = rate_by_date.find(date);
        if (q_it == rate_by_date.end()) {
            drop("no rates row");
            continue;
        }
        const double close = csv_cell_double(row[s_close], "spot close @" + date);
        if (!(close > 0.0)) {
            drop("missing or non-positive spot close");
            continue;
        }
        const auto& orow = *o_it->second;
        const double price = csv_cell_double(orow[o_price], "option price @" + date);
        if (!(price > 0.0)) {
            drop("missing or non-positive option price");
            continue;
        }
        const auto& qrow = *q_it->second;
        double pct = csv_cell_double(qrow[r_1m], "rate_1m @" + date);
        if (std::isnan(pct)) pct = csv_cell_double(qrow[r_3m], "rate_3m @" + date);
        if (std::isnan(pct)) {
            drop("no usable rate");
            continue;
        }
        const double tau_d = o_tau >= 0 ? csv_cell_double(orow[o_tau], "tau_days @" + date)
                                        : std::numeric_limits<double>::quiet_NaN();
        const double tau_years = (std::isnan(tau_d) || tau_d <= 0.0) ? 30.0 / 365.0
                                                                     : tau_d / 365.0;

        m.dates.push_back(date);
        m.Y.push_back(std::log(close));
        m.C.push_back(price);
        m.r.push_back(pipedetail::continuous_rate(pct, tau_years));
        const auto push = [&](std::vector<double>& col, int idx) {
            col.push_back(idx >= 0 ? csv_cell_double(orow[idx], "option extras @" + date)
                                   : std::numeric_limits<double>::quiet_NaN());
        };
        push(m.implied_vol, o_iv);
        push(m.strike, o_strike);
        push(m.tau_days, o_tau);
        push(m.delta, o_delta);
        push(m.gamma, o_gamma);
        push(m.theta, o_theta);
        push(m.call_volume, o_cv);
        push(m.put_volume, o_pv);
        push(m.put_price, o_pp);
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Single-file MarketSeries CSV (the estimate subcommand's input format).
// ---------------------------------------------------------------------------

inline std::string market_series_to_csv(const MarketSeries& m) {
    CsvTable t;
    t.header = {"date", "Y", "C", "r"};
    const bool opts = m.has_options();
    if (!opts) t.header = {"date", "Y", "r"};
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::vector<std::string> row{m.dates[i], detail::format_double(m.Y[i])};
        if (opts) row.push_back(detail::format_double(m.C[i]));
        row.push_back(detail::format_double(m.r[i]));
        t.rows.push_back(std::move(row));
    }
    return to_csv(t);
}

/// Reads an aligned series: date (or date_index), Y, r, and optionally C.
inline MarketSeries market_series_from_csv(const std::string& text) {
    const CsvTable t = parse_csv(text);
    const int date = t.column("date") >= 0 ? t.column("date") : t.column("date_index");
    if (date < 0) throw std::invalid_argument("market csv: need a date or date_index column");
    const int y = t.require_column("Y");
    const int r = t.require_column("r");
    const int c = t.column("C");
    MarketSeries m;
    for (const auto& row : t.rows) {
        m.dates.push_back(row[date]);
        m.Y.push_back(csv_cell_double(row[y], "Y"));
        m.r.push_back(csv_cell_double(row[r], "r"));
        if (c >= 0) {
            const double price = csv_cell_double(row[c], "C");
            if (std::isnan(price))
                throw std::invalid_argument("market csv: empty option price");
            m.C.push_back(price);
        }
    }
    // date_index columns are zero-padded on write, so plain integers are
    // normalized for the strict ordering check.
    if (t.column("date") < 0) {
        for (auto& d : m.dates) {
            if (d.size() < 12) d.insert(d.begin(), 12 - d.size(), '0');
        }
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Price-draw binary table: 16-byte header (12-byte magic + u32 version),
// u64 n_days, u64 n_draws, then days x draws little-endian doubles.
// ---------------------------------------------------------------------------

inline constexpr char kPriceDrawMagic[12] = {'M', 'R', 'P', 'R', 'I', 'C',
                                             'E', 'G', 'R', 'D', '1', '\0'};
inline constexpr std::uint32_t kPriceDrawVersion = 1;

/// Writes the retained-iteration price paths (iterations x days) as a
/// days x draws table.
inline void write_price_draws(const std::string& path,
                              const std::vector<std::vector<double>>& draws_by_iter) {
    if (draws_by_iter.empty())
        throw std::invalid_argument("write_price_draws: no draws");
    const std::uint64_t n_draws = draws_by_iter.size();
    const std::uint64_t n_days = draws_by_iter.front().size();
    for (const auto& row : draws_by_iter)
        if (row.size() != n_days)
            throw std::invalid_argument("write_price_draws: ragged draw matrix");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(kPriceDrawMagic, sizeof(kPriceDrawMagic));
    out.write(reinterpret_cast<const char*>(&kPriceDrawVersion), sizeof(kPriceDrawVersion));
    out.write(reinterpret_cast<const char*>(&n_days), sizeof(n_days));
    out.write(reinterpret_cast<const char*>(&n_draws), sizeof(n_draws));
    for (std::uint64_t t = 0; t < n_days; ++t)
        for (std::uint64_t g = 0; g < n_draws; ++g)
            out.write(reinterpret_cast<const char*>(&draws_by_iter[g][t]), sizeof(double));
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Reads a price-draw table as days x draws (the risk module's layout).
inline std::vector<std::vector<double>> read_price_draws(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    char magic[sizeof(kPriceDrawMagic)];
    std::uint32_t version = 0;
    std::uint64_t n_days = 0, n_draws = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&n_days), sizeof(n_days));
    in.read(reinterpret_cast<char*>(&n_draws), sizeof(n_draws));
    if (!in || std::memcmp(magic, kPriceDrawMagic, sizeof(magic)) != 0)
        throw std::runtime_error("price draws: bad magic in " + path);
    if (version != kPriceDrawVersion)
        throw std::runtime_error("price draws: unsupported version in " + path);
    std::vector<std::vector<double>> by_day(n_days, std::vector<double>(n_draws));
    for (std::uint64_t t = 0; t < n_days; ++t) {
        in.read(reinterpret_cast<char*>(by_day[t].data()),
                static_cast<std::streamsize>(n_draws * sizeof(double)));
    }
    if (!in) throw std::runtime_error("price draws: truncated file " + path);
    return by_day;
}

// ---------------------------------------------------------------------------
// Content digests (FNV-1a 64) for manifest echoes and determinism checks.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string digest_hex(const std::string& bytes) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
    std::string model;       // model kind name, e.g. "sv"
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    double eta = 0.05;       // ES level for the risk stage
    // Either a single aligned market CSV, or the three raw sources.
    std::string market_csv;
    std::string spot_csv, options_csv, rates_csv;
    std::string spec_config;  // initial ModelSpec config (required)
    std::string prior_config; // optional prior overrides
    long n_iter = 30000, n_burnin = 10000;
    int thin = 1;

    std::vector<std::string> errors() const {
        std::vector<std::string> errs;
        try {
            model_kind_from_string(model);
        } catch (const std::exception& e) {
            errs.emplace_back(e.what());
        }
        if (spec_config.empty()) errs.emplace_back("manifest: spec_config is required");
        if (market_csv.empty() &&
            (spot_csv.empty() || options_csv.empty() || rates_csv.empty()))
            errs.emplace_back("manifest: need data.market or all of data.spot/options/rates");
        if (n_iter <= 0 || n_burnin < 0 || n_burnin >= n_iter)
            errs.emplace_back("manifest: need 0 <= n_burnin < n_iter");
        if (thin < 1) errs.emplace_back("manifest: thin must be >= 1");
        if (!(eta > 0.0 && eta < 1.0)) errs.emplace_back("manifest: eta must lie in (0,1)");
        return errs;
    }
};

inline RunManifest manifest_from_config(const ConfigMap& cfg) {
    RunManifest m;
    for (const auto& [key, value] : cfg) {
        if (key == "run.model") m.model = value;
        else if (key == "run.seed") m.seed = static_cast<std::uint64_t>(
                std::stoull(value));
        else if (key == "run.out_dir") m.out_dir = value;
        else if (key == "run.eta") m.eta = detail::parse_double(key, value);
        else if (key == "run.spec_config") m.spec_config = value;
        else if (key == "run.prior_config") m.prior_config = value;
        else if (key == "data.market") m.market_csv = value;
        else if (key == "data.spot") m.spot_csv = value;
        else if (key == "data.options") m.options_csv = value;
        else if (key == "data.rates") m.rates_csv = value;
        else if (key == "chain.n_iter") m.n_iter = std::lround(detail::parse_double(key, value));
        else if (key == "chain.n_burnin")
            m.n_burnin = std::lround(detail::parse_double(key, value));
        else if (key == "chain.thin") m.thin = static_cast<int>(
                std::lround(detail::parse_double(key, value)));
        else throw std::invalid_argument("manifest: unknown key " + key);
    }
    return m;
}

inline std::string manifest_to_config(const RunManifest& m) {
    std::ostringstream out;
    out << "run.model = " << m.model << "\n";
    out << "run.seed = " << m.seed << "\n";
    out << "run.out_dir = " << m.out_dir << "\n";
    out << "run.eta = " << detail::format_double(m.eta) << "\n";
    out << "run.spec_config = " << m.spec_config << "\n";
    if (!m.prior_config.empty()) out << "run.prior_config = " << m.prior_config << "\n";
    if (!m.market_csv.empty()) out << "data.market = " << m.market_csv << "\n";
    if (!m.spot_csv.empty()) out << "data.spot = " << m.spot_csv << "\n";
    if (!m.options_csv.empty()) out << "data.options = " << m.options_csv << "\n";
    if (!m.rates_csv.empty()) out << "data.rates = " << m.rates_csv << "\n";
    out << "chain.n_iter = " << m.n_iter << "\n";
    out << "chain.n_burnin = " << m.n_burnin << "\n";
    out << "chain.thin = " << m.thin << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Artifact serialization
// ---------------------------------------------------------------------------

inline std::string draws_to_csv(const PosteriorDraws& p) {
    CsvTable t;
    t.header.push_back("iter");
    for (const auto& n : p.param_names) t.header.push_back(n);
    for (std::size_t i = 0; i < p.draws.size(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (double x : p.draws[i]) row.push_back(detail::format_double(x));
        t.rows.push_back(std::move(row));
    }
    return to_csv(t);
}

inline std::string acceptance_to_csv(const PosteriorDraws& p) {
    CsvTable t;
    t.header = {"block", "proposals", "accepts", "rate"};
    for (const auto& [name, stat] : p.acceptance)
        t.rows.push_back({name, std::to_string(stat.proposals), std::to_string(stat.accepts),
                          detail::format_double(stat.rate())});
    return to_csv(t);
}

/// Posterior means and standard deviations, one parameter per row.
inline std::string summary_to_csv(const PosteriorDraws& p) {
    CsvTable t;
    t.header = {"parameter", "mean", "sd"};
    const std::size_t n = p.draws.size();
    for (std::size_t j = 0; j < p.param_names.size(); ++j) {
        double mean = 0.0;
        for (const auto& row : p.draws) mean += row[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& row : p.draws) var += (row[j] - mean) * (row[j] - mean);
        var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
        t.rows.push_back({p.param_names[j], detail::format_double(mean),
                          detail::format_double(std::sqrt(var))});
    }
    return to_csv(t);
}

inline std::string logliks_to_csv(const PosteriorDraws& p) {
    CsvTable t;
    t.header = {"iter", "loglik_returns", "loglik_returns_marginal", "loglik_options"};
    for (std::size_t i = 0; i < p.loglik_returns.size(); ++i) {
        const double marg = i < p.loglik_returns_marginal.size() ? p.loglik_returns_marginal[i]
                                                                 : p.loglik_returns[i];
        const double opt = i < p.loglik_options.size() ? p.loglik_options[i] : 0.0;
        t.rows.push_back({std::to_string(i), detail::format_double(p.loglik_returns[i]),
                          detail::format_double(marg), detail::format_double(opt)});
    }
    return to_csv(t);
}

inline std::string latents_to_csv(const PosteriorDraws& p,
                                  const std::vector<std::string>& dates) {
    CsvTable t;
    t.header = {"date", "v_mean", "jy_mean", "jv_mean"};
    for (std::size_t i = 0; i < p.v_mean.size(); ++i) {
        const auto at = [&](const std::vector<double>& v) {
            return i < v.size() ? detail::format_double(v[i]) : std::string("0");
        };
        t.rows.push_back({i < dates.size() ? dates[i] : std::to_string(i), at(p.v_mean),
                          at(p.jy_mean), at(p.jv_mean)});
    }
    return to_csv(t);
}

/// Returns-likelihood DIC of a finished chain, one row. Built on the
/// jump-marginalized likelihood so that chains with different latent
/// augmentation remain comparable.
inline std::string dic_to_csv(const PosteriorDraws& p) {
    const DicResult d =
        dic_detail(p.loglik_returns_marginal, p.loglik_returns_marginal_at_mean);
    CsvTable t;
    t.header = {"dic", "d_bar", "p_d"};
    t.rows.push_back({detail::format_double(d.dic), detail::format_double(d.d_bar),
                      detail::format_double(d.p_d)});
    return to_csv(t);
}

inline std::string risk_report_to_csv(const RiskReport& rep,
                                      const std::vector<std::string>& dates) {
    CsvTable t;
    t.header = {"date", "tmr", "per", "msr", "per_long", "per_short", "tmr_long", "tmr_short"};
    for (std::size_t i = 0; i < rep.days.size(); ++i) {
        const DayRisk& d = rep.days[i];
        t.rows.push_back({i < dates.size() ? dates[i] : std::to_string(i),
                          detail::format_double(d.tmr), detail::format_double(d.per),
                          detail::format_double(d.msr), detail::format_double(d.per_long),
                          detail::format_double(d.per_short), detail::format_double(d.tmr_long),
                          detail::format_double(d.tmr_short)});
    }
    return to_csv(t);
}

/// Minimal grouped bar chart: per day one grey TMR bar with a black PER bar
/// in front of it.
inline std::string risk_report_to_svg(const RiskReport& rep) {
    const std::size_t n = rep.days.size();
    const double width = 960.0, height = 320.0, margin = 30.0;
    double peak = 1e-12;
    for (const auto& d : rep.days) peak = std::max(peak, std::max(d.tmr, d.per));
    const double bw = (width - 2 * margin) / std::max<std::size_t>(n, 1);
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    for (std::size_t i = 0; i < n; ++i) {
        const double x = margin + bw * static_cast<double>(i);
        const double h_tmr = (height - 2 * margin) * rep.days[i].tmr / peak;
        const double h_per = (height - 2 * margin) * rep.days[i].per / peak;
        out << "<rect x=\"" << x << "\" y=\"" << height - margin - h_tmr << "\" width=\""
            << bw * 0.9 << "\" height=\"" << h_tmr << "\" fill=\"#b0b0b0\"/>\n";
        out << "<rect x=\"" << x << "\" y=\"" << height - margin - h_per << "\" width=\""
            << bw * 0.45 << "\" height=\"" << h_per << "\" fill=\"#000000\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Pipeline orchestration: estimate -> risk -> residual diagnostics.
// ---------------------------------------------------------------------------

struct PipelineArtifacts {
    std::vector<std::string> files; // paths written, in order
    std::vector<std::string> log;
    PosteriorDraws posterior;       // kept for callers that post-process
};

namespace pipedetail {

inline ModelSpec posterior_mean_spec(const ModelSpec& spec0, const PosteriorDraws& p) {
    ModelSpec spec = spec0;
    for (std::size_t j = 0; j < p.param_names.size(); ++j) {
        double mean = 0.0;
        for (const auto& row : p.draws) mean += row[j];
        set_param(spec, p.param_names[j], mean / static_cast<double>(p.draws.size()));
    }
    return spec;
}

inline EstimationData to_estimation_data(const MarketSeries& m) {
    EstimationData d;
    d.Y = m.Y;
    d.r = m.r;
    d.C = m.C;
    double tau_sum = 0.0;
    int tau_n = 0;
    for (double td : m.tau_days)
        if (!std::isnan(td) && td > 0.0) {
            tau_sum += td;
            ++tau_n;
        }
    if (tau_n > 0) d.tau = tau_sum / tau_n / 365.0;
    return d;
}

} // namespace pipedetail

/// Writes the complete set of estimation artifacts into out_dir and returns
/// the paths written. Shared by the estimate subcommand and run_pipeline.
inline std::vector<std::string> write_estimation_artifacts(const std::string& out_dir,
                                                           const ModelSpec& spec0,
                                                           const PosteriorDraws& post,
                                                           const std::vector<std::string>& dates) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> files;
    const auto emit = [&](const std::string& name, const std::string& text) {
        const std::string path = (fs::path(out_dir) / name).string();
        write_text_file(path, text);
        files.push_back(path);
    };
    emit("draws.csv", draws_to_csv(post));
    emit("acceptance.csv", acceptance_to_csv(post));
    emit("summary.csv", summary_to_csv(post));
    emit("logliks.csv", logliks_to_csv(post));
    emit("dic.csv", dic_to_csv(post));
    emit("latents.csv", latents_to_csv(post, dates));
    emit("spec_mean.cfg", model_spec_to_config(pipedetail::posterior_mean_spec(spec0, post)));
    if (!post.warnings.empty()) {
        std::ostringstream w;
        for (const auto& line : post.warnings) w << line << "\n";
        emit("warnings.txt", w.str());
    }
    if (!post.price_draws.empty()) {
        const std::string path = (fs::path(out_dir) / "price_draws.bin").string();
        write_price_draws(path, post.price_draws);
        files.push_back(path);
    }
    return files;
}

/// Executes the full estimate -> risk -> diagnostics sequence for a
/// manifest. A failing stage writes "<stage>.failed" with the error text into
/// the output directory and rethrows.
inline PipelineArtifacts run_pipeline(const RunManifest& manifest) {
    const auto errs = manifest.errors();
    if (!errs.empty()) throw std::invalid_argument(errs.front());

    namespace fs = std::filesystem;
    fs::create_directories(manifest.out_dir);
    PipelineArtifacts art;
    const auto emit = [&](const std::string& name, const std::string& text) {
        const std::string path = (fs::path(manifest.out_dir) / name).string();
        write_text_file(path, text);
        art.files.push_back(path);
    };
    const auto stage = [&](const std::string& name, const auto& body) {
        try {
            body();
        } catch (const std::exception& e) {
            emit(name + ".failed", std::string(e.what()) + "\n");
            throw std::runtime_error("stage " + name + " failed: " + e.what());
        }
    };

    // --- data -------------------------------------------------------------
    MarketSeries market;
    std::vector<std::string> input_digests;
    stage("ingest", [&] {
        if (!manifest.market_csv.empty()) {
            const std::string text = read_text_file(manifest.market_csv);
            input_digests.push_back("market " + digest_hex(text));
            market = market_series_from_csv(text);
        } else {
            const std::string spot = read_text_file(manifest.spot_csv);
            const std::string opts = read_text_file(manifest.options_csv);
            const std::string rates = read_text_file(manifest.rates_csv);
            input_digests.push_back("spot " + digest_hex(spot));
            input_digests.push_back("options " + digest_hex(opts));
            input_digests.push_back("rates " + digest_hex(rates));
            market = ingest(spot, opts, rates);
        }
        std::ostringstream log;
        log << "rows " << market.size() << "\ndropped " << market.dropped_rows << "\n";
        for (const auto& line : market.log) log << line << "\n";
        emit("ingest.log", log.str());
    });

    // --- estimate ---------------------------------------------------------
    ModelSpec spec0;
    PosteriorDraws post;
    stage("estimate", [&] {
        const std::string spec_text = read_text_file(manifest.spec_config);
        input_digests.push_back("spec_config " + digest_hex(spec_text));
        spec0 = model_spec_from_config(parse_config(spec_text));
        if (to_string(spec0.kind) != manifest.model)
            throw std::invalid_argument("manifest model '" + manifest.model +
                                        "' does not match spec config kind '" +
                                        to_string(spec0.kind) + "'");
        PriorSet priors = PriorSet::defaults();
        if (!manifest.prior_config.empty()) {
            const std::string prior_text = read_text_file(manifest.prior_config);
            input_digests.push_back("prior_config " + digest_hex(prior_text));
            priors = prior_set_from_config(parse_config(prior_text));
        }
        const EstimationData data = pipedetail::to_estimation_data(market);
        ChainConfig cfg;
        cfg.n_iter = static_cast<int>(manifest.n_iter);
        cfg.n_burnin = static_cast<int>(manifest.n_burnin);
        cfg.thin = manifest.thin;
        cfg.seed = manifest.seed;
        post = run_chain(spec0, data, priors, cfg);
        const auto written =
            write_estimation_artifacts(manifest.out_dir, spec0, post, market.dates);
        art.files.insert(art.files.end(), written.begin(), written.end());
    });

    // --- risk -------------------------------------------------------------
    if (market.has_options() && !post.price_draws.empty()) {
        stage("risk", [&] {
            std::vector<std::vector<double>> by_day(
                market.size(), std::vector<double>(post.price_draws.size()));
            for (std::size_t g = 0; g < post.price_draws.size(); ++g)
                for (std::size_t t = 0; t < market.size(); ++t)
                    by_day[t][g] = post.price_draws[g][t];
            const RiskReport rep = risk_series(by_day, market.C, manifest.eta);
            emit("risk.csv", risk_report_to_csv(rep, market.dates));
            emit("risk.svg", risk_report_to_svg(rep));
        });
    } else {
        art.log.push_back("risk stage skipped: no option data");
    }

    // --- residual diagnostics ---------------------------------------------
    stage("residual-tests", [&] {
        const ModelSpec mean_spec = pipedetail::posterior_mean_spec(spec0, post);
        const ResidualSeries res = compute_residuals(mean_spec, market.Y, market.r, post.v_mean,
                                                     post.jy_mean, post.jv_mean);
        CsvTable t;
        t.header = {"series", "n", "ks_stat", "ks_pvalue", "abadie_pvalue"};
        const auto add = [&](const std::string& name, const std::vector<double>& x) {
            if (x.size() < 20) return;
            const TestResult ks = ks_test(x);
            const double ab = abadie_pvalue(x, 1000, manifest.seed ^ 0xabad1eull);
            t.rows.push_back({name, std::to_string(x.size()), detail::format_double(ks.statistic),
                              detail::format_double(ks.pvalue), detail::format_double(ab)});
        };
        add("return_residuals", res.return_residuals);
        add("vol_residuals", res.vol_residuals);
        emit("residual_tests.csv", to_csv(t));
    });

    // --- manifest echo -----------------------------------------------------
    {
        std::ostringstream echo;
        echo << manifest_to_config(manifest);
        for (const auto& d : input_digests) echo << "# input " << d << "\n";
        for (const auto& f : art.files)
            echo << "# artifact " << fs::path(f).filename().string() << " "
                 << digest_hex(read_text_file(f)) << "\n";
        emit("manifest_echo.cfg", echo.str());
    }
    art.posterior = std::move(post);
    return art;
}

} // namespace modelrisk
