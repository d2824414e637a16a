#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"

#include "sgflm/errors.hpp"
#include "sgflm/experiments.hpp"
#include "sgflm/fit.hpp"
#include "sgflm/inference.hpp"
#include "sgflm/io.hpp"
#include "sgflm/simulate.hpp"

namespace sgflm::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// Raised for unusable flags, config files or output locations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

double to_double(const std::string& s, const std::string& key)
{
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("'" + s + "' is not a number (" + key + ")");
    }
}

long long to_integer(const std::string& s, const std::string& key)
{
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("'" + s + "' is not an integer (" + key + ")");
    }
}

/// Converts a flag string to the JSON type of the key's default.
json typed_value(const std::string& key, const std::string& raw, const json& defaults)
{
    const json& def = defaults.at(key);
    if (key == "fit.p") {
        if (raw == "auto")
            return raw;
        return to_integer(raw, key);
    }
    if (key == "mc.fixed_p")
        return to_integer(raw, key);
    if (key == "seed") {
        try {
            return std::stoull(raw);
        } catch (const std::exception&) {
            throw ConfigError("'" + raw + "' is not a seed");
        }
    }
    switch (def.type()) {
    case json::value_t::boolean:
        if (raw == "true" || raw == "1")
            return true;
        if (raw == "false" || raw == "0")
            return false;
        throw ConfigError("'" + raw + "' is not a boolean (" + key + ")");
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
        return to_integer(raw, key);
    case json::value_t::number_float:
        return to_double(raw, key);
    case json::value_t::array: {
        json a = json::array();
        for (const auto& item : split_list(raw))
            a.push_back(to_double(item, key));
        return a;
    }
    default:
        return raw;
    }
}

std::string default_output_dir()
{
    const char* env = std::getenv(kOutputRootEnv);
    return env && *env ? env : ".";
}

/// Flags registered on a subcommand, bound to dotted config keys.
class Overrides {
public:
    explicit Overrides(CLI::App* app) : app_(app) {}

    void add(const std::string& flag, const std::string& key, const std::string& help)
    {
        auto& slot = values_[key];
        options_.emplace_back(key, app_->add_option(flag, slot, help));
    }

    /// --lattice RxC -> lattice.rows, lattice.cols
    void add_lattice()
    {
        lattice_ = app_->add_option("--lattice", lattice_raw_, "lattice size, e.g. 20x20");
    }

    /// --eta-bounds lo,hi -> fit.eta_low, fit.eta_high
    void add_eta_bounds()
    {
        bounds_ = app_->add_option("--eta-bounds", bounds_raw_, "eta search interval lo,hi");
    }

    void apply(json& cfg, const json& defaults) const
    {
        for (const auto& [key, opt] : options_)
            if (opt->count() > 0)
                cfg[key] = typed_value(key, values_.at(key), defaults);
        if (lattice_ && lattice_->count() > 0) {
            const auto x = lattice_raw_.find('x');
            if (x == std::string::npos)
                throw ConfigError("--lattice expects RxC, got '" + lattice_raw_ + "'");
            cfg["lattice.rows"] = to_integer(lattice_raw_.substr(0, x), "lattice.rows");
            cfg["lattice.cols"] = to_integer(lattice_raw_.substr(x + 1), "lattice.cols");
        }
        if (bounds_ && bounds_->count() > 0) {
            const auto parts = split_list(bounds_raw_);
            if (parts.size() != 2)
                throw ConfigError("--eta-bounds expects lo,hi");
            cfg["fit.eta_low"] = to_double(parts[0], "fit.eta_low");
            cfg["fit.eta_high"] = to_double(parts[1], "fit.eta_high");
        }
    }

private:
    CLI::App* app_;
    std::map<std::string, std::string> values_;
    std::vector<std::pair<std::string, CLI::Option*>> options_;
    CLI::Option* lattice_ = nullptr;
    std::string lattice_raw_;
    CLI::Option* bounds_ = nullptr;
    std::string bounds_raw_;
};

json load_config_file(const std::string& path, const json& defaults)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path);
    json file;
    try {
        file = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed config file " + path + ": " + e.what());
    }
    if (!file.is_object())
        throw ConfigError("config file must hold a JSON object of dotted keys");
    for (const auto& [key, value] : file.items())
        if (!defaults.contains(key))
            throw ConfigError("unknown config key '" + key + "' in " + path);
    return file;
}

json resolve(const std::string& config_path, const Overrides& flags)
{
    const json defaults = default_config();
    json cfg = defaults;
    if (!config_path.empty()) {
        const json file = load_config_file(config_path, defaults);
        for (const auto& [key, value] : file.items())
            cfg[key] = value;
    }
    flags.apply(cfg, defaults);
    return cfg;
}

/// Provenance over the resolved config minus the output location.
io::Provenance provenance(const json& cfg)
{
    json hashed = cfg;
    hashed.erase("output.dir");
    return {io::fnv1a_hex(hashed.dump()), cfg.at("seed").get<std::uint64_t>()};
}

fs::path require_dir(const json& cfg)
{
    const fs::path dir = cfg.at("output.dir").get<std::string>();
    if (!fs::is_directory(dir))
        throw ConfigError("output directory does not exist: " + dir.string());
    return dir;
}

SimConfig sim_config(const json& cfg)
{
    try {
        SimConfig sim;
        sim.lattice.rows = cfg.at("lattice.rows").get<int>();
        sim.lattice.cols = cfg.at("lattice.cols").get<int>();
        sim.lattice.wrap = cfg.at("lattice.wrap").get<bool>();
        sim.lattice.kind = parse_neighborhood(cfg.at("lattice.neighborhood").get<std::string>());
        const auto beta = cfg.at("sim.beta").get<std::vector<double>>();
        sim.true_theta = Theta{cfg.at("sim.eta").get<double>(), cfg.at("sim.alpha").get<double>(),
                               Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()))};
        sim.basis_size = cfg.at("sim.basis_size").get<int>();
        sim.mu = FunctionGrid::sample(uniform_grid(cfg.at("sim.grid_points").get<int>()),
                                      default_mean_curve);
        sim.burn_in = cfg.at("sim.burn_in").get<int>();
        sim.thin = cfg.at("sim.thin").get<int>();
        sim.replicates = cfg.at("sim.replicates").get<int>();
        sim.seed = cfg.at("seed").get<std::uint64_t>();
        sim.chain_mode = parse_chain_mode(cfg.at("sim.chain_mode").get<std::string>());
        sim.validate();
        return sim;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

FitConfig fit_config(const json& cfg)
{
    try {
        FitConfig fit;
        fit.p_candidates.clear();
        const int p_max = cfg.at("fit.p_max").get<int>();
        for (int p = 1; p <= p_max; ++p)
            fit.p_candidates.push_back(p);
        fit.eta_low = cfg.at("fit.eta_low").get<double>();
        fit.eta_high = cfg.at("fit.eta_high").get<double>();
        fit.grad_tol = cfg.at("fit.tol").get<double>();
        fit.max_iter = cfg.at("fit.max_iter").get<int>();
        fit.init_mode = parse_init_mode(cfg.at("fit.init").get<std::string>());
        fit.validate();
        return fit;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ModelKind model_kind(const json& cfg)
{
    try {
        return parse_model_kind(cfg.at("fit.model").get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

/// Fixed p from the config, or nullopt for AIC selection.
std::optional<int> fixed_p(const json& cfg)
{
    const json& p = cfg.at("fit.p");
    if (p.is_string()) {
        if (p.get<std::string>() != "auto")
            throw ConfigError("fit.p must be an integer or \"auto\"");
        return std::nullopt;
    }
    return p.get<int>();
}

FitResult run_fit(std::span<const Dataset> data, const json& cfg)
{
    const FitConfig fit = fit_config(cfg);
    const ModelKind model = model_kind(cfg);
    const auto p = fixed_p(cfg);
    if (p && *p > data.front().num_scores())
        throw ConfigError("p = " + std::to_string(*p) + " exceeds the stored scores");
    try {
        if (p)
            return model == ModelKind::sgflm ? fit_sgflm(data, *p, fit) : fit_gflm(data, *p, fit);
        return select_p_aic(data, fit, model);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

double raw_alpha(const FitResult& fit, std::span<const Dataset> data)
{
    const Dataset& d = data.front();
    if (!d.meta.centered || d.meta.xbar_scores.size() < fit.theta_hat.p())
        return fit.theta_hat.alpha;
    return uncentered_intercept(fit.theta_hat.alpha, fit.theta_hat.beta, d.meta.xbar_scores);
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

BasisSet basis_for(const Dataset& d)
{
    return make_trig_basis(d.num_scores(), uniform_grid(d.meta.grid_points));
}

int cmd_simulate(const json& cfg, std::ostream& out)
{
    const fs::path dir = require_dir(cfg);
    const SimConfig sim = sim_config(cfg);
    const io::Provenance prov = provenance(cfg);
    json echo = cfg;
    echo.erase("output.dir");
    out << echo.dump(2) << "\n";
    const MCCase mc = simulate_case(sim);
    io::write_case(dir, mc, prov, io::sim_config_to_json(sim));
    return kOk;
}

int cmd_fit(const json& cfg, const std::string& data_dir, std::ostream& out)
{
    const fs::path dir = require_dir(cfg);
    const auto data = io::read_case(data_dir);
    const io::Provenance prov = provenance(cfg);

    FitResult fit;
    try {
        fit = run_fit(data, cfg);
    } catch (const NumericalError& e) {
        write_json(dir / "fit.json", json{{"model", cfg.at("fit.model")},
                                          {"diagnostics", {{"converged", false}, {"message", e.what()}}},
                                          {"provenance", prov.to_json()}});
        throw;
    }
    write_json(dir / "fit.json", io::fit_to_json(fit, raw_alpha(fit, data), prov));
    io::write_function_csv(dir / "beta_hat.csv", reconstruct(fit.theta_hat.beta, basis_for(data.front())), prov);
    out << "model=" << to_string(fit.model) << " p=" << fit.p_selected
        << " converged=" << (fit.converged ? "true" : "false") << " aic=" << fit.aic << "\n";
    if (!fit.converged)
        throw NumericalError("fit did not converge: " + fit.message);
    return kOk;
}

int cmd_band(const json& cfg, const std::string& data_dir, const std::string& fit_path,
             bool pointwise, std::ostream& out)
{
    const fs::path dir = require_dir(cfg);
    const auto data = io::read_case(data_dir);
    const io::Provenance prov = provenance(cfg);

    FitResult fit;
    if (!fit_path.empty()) {
        std::ifstream in(fit_path);
        if (!in)
            throw ConfigError("cannot read fit file " + fit_path);
        try {
            fit = io::fit_from_json(json::parse(in));
        } catch (const json::exception& e) {
            throw DataError(fit_path + ": " + e.what());
        }
        if (fit.p_selected > data.front().num_scores())
            throw DataError(fit_path + ": p exceeds the stored scores");
    } else {
        fit = run_fit(data, cfg);
        if (!fit.converged)
            throw NumericalError("fit did not converge: " + fit.message);
    }

    const bool spatial = fit.model == ModelKind::sgflm;
    const double level = cfg.at("inference.level").get<double>();
    const int big_n = static_cast<int>(data.size());
    const BandType type = pointwise || cfg.at("inference.band").get<std::string>() == "pointwise"
        ? BandType::pointwise
        : BandType::simultaneous;

    const SandwichMatrices sw = sandwich(data, fit.theta_hat, spatial);
    const ConfidenceBand band = band_beta(sw, fit.theta_hat, basis_for(data.front()), big_n, level, type);
    io::write_band_csv(dir / "band.csv", band, prov);

    json inf{{"model", to_string(fit.model)},
             {"p", fit.p_selected},
             {"replicates", big_n},
             {"level", level},
             {"band_type", band.simultaneous ? "simultaneous" : "pointwise"},
             {"sandwich", io::sandwich_summary(sw)},
             {"provenance", prov.to_json()}};
    const Eigen::VectorXd b = fit.theta_hat.regression_vector();
    inf["quadratic_stat_beta_zero"] = quadratic_stat_beta(sw, b, Eigen::VectorXd::Zero(b.size()), big_n);
    if (spatial) {
        const auto [lo, hi] = ci_eta(sw, fit.theta_hat.eta, big_n, level);
        inf["eta_hat"] = fit.theta_hat.eta;
        inf["eta_ci"] = {lo, hi};
        inf["z_eta_zero"] = fit.theta_hat.eta / std::sqrt(sw.G11_inv / big_n);
    }
    write_json(dir / "inference.json", inf);
    out << "band written to " << (dir / "band.csv").string() << "\n";
    return kOk;
}

int cmd_mc(const json& cfg, std::ostream& out)
{
    const fs::path dir = require_dir(cfg);
    const io::Provenance prov = provenance(cfg);
    const SimConfig base = sim_config(cfg);
    const FitConfig fit = fit_config(cfg);

    McOptions opt;
    opt.cases = cfg.at("mc.cases").get<int>();
    opt.workers = cfg.at("mc.workers").get<int>();
    opt.level = cfg.at("inference.level").get<double>();
    opt.band_type = cfg.at("inference.band").get<std::string>() == "pointwise" ? BandType::pointwise
                                                                             : BandType::simultaneous;
    if (!cfg.at("mc.fixed_p").is_null())
        opt.fixed_p = cfg.at("mc.fixed_p").get<int>();
    else if (const auto p = fixed_p(cfg))
        opt.fixed_p = p;
    if (opt.cases < 1 || opt.workers < 1)
        throw ConfigError("mc.cases and mc.workers must be positive");

    std::vector<MCReport> reports;
    std::ofstream jsonl(dir / "cases.jsonl", std::ios::binary | std::ios::trunc);
    if (!jsonl)
        throw ConfigError("cannot write " + (dir / "cases.jsonl").string());
    for (double eta : cfg.at("mc.eta").get<std::vector<double>>()) {
        SimConfig sim = base;
        sim.true_theta.eta = eta;
        try {
            sim.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        MCReport rep = run_mc(sim, fit, opt);
        io::write_cases_jsonl(jsonl, rep);
        if (rep.failed_cases < opt.cases)
            io::write_band_csv(dir / ("bands_eta" + io::format_double(eta) + ".csv"),
                               rep.average_band_sgflm, prov, &rep.beta_true_curve);
        out << "eta=" << eta << " cases=" << opt.cases << " failed=" << rep.failed_cases << "\n";
        reports.push_back(std::move(rep));
    }
    io::write_table1_csv(dir / "table1.csv", reports, prov);
    return kOk;
}

} // namespace

json default_config()
{
    return json{
        {"lattice.rows", 20},
        {"lattice.cols", 20},
        {"lattice.wrap", true},
        {"lattice.neighborhood", "four_nearest"},
        {"sim.eta", 0.6},
        {"sim.alpha", 0.0},
        {"sim.beta", {1.0, 1.0 / 2.0, 1.0 / 3.0}},
        {"sim.basis_size", 20},
        {"sim.grid_points", 50},
        {"sim.burn_in", 200},
        {"sim.thin", 200},
        {"sim.replicates", 20},
        {"sim.chain_mode", "thinned_shared"},
        {"seed", std::uint64_t{1}},
        {"fit.model", "sgflm"},
        {"fit.p", "auto"},
        {"fit.p_max", 10},
        {"fit.eta_low", -kDefaultEtaMax},
        {"fit.eta_high", kDefaultEtaMax},
        {"fit.tol", 1e-6},
        {"fit.max_iter", 100},
        {"fit.init", "fpcr"},
        {"inference.level", 0.95},
        {"inference.band", "simultaneous"},
        {"mc.eta", {0.3, 0.6, 0.9, 1.2}},
        {"mc.cases", 100},
        {"mc.workers", 1},
        {"mc.fixed_p", nullptr},
        {"output.dir", default_output_dir()},
    };
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Spatial generalized functional linear model: simulate, fit, infer, Monte Carlo"};
    app.require_subcommand(1);

    std::string config_path, data_dir, fit_path;
    bool pointwise = false;

    const auto common = [&](CLI::App* sub, Overrides& o) {
        sub->add_option("--config", config_path, "JSON file of dotted config keys");
        o.add("--out", "output.dir", "existing output directory");
        o.add("--seed", "seed", "master seed");
    };
    const auto sim_flags = [](Overrides& o, bool eta_list) {
        o.add_lattice();
        if (eta_list)
            o.add("--eta", "mc.eta", "true eta values, comma separated");
        else
            o.add("--eta", "sim.eta", "true spatial dependence");
        o.add("--alpha", "sim.alpha", "true intercept");
        o.add("--beta", "sim.beta", "true basis coefficients, comma separated");
        o.add("--replicates", "sim.replicates", "replicates per case (N)");
        o.add("--basis-size", "sim.basis_size", "number of basis functions (J)");
        o.add("--burn-in", "sim.burn_in", "Gibbs burn-in sweeps");
        o.add("--thin", "sim.thin", "Gibbs sweeps between emitted replicates");
        o.add("--chain-mode", "sim.chain_mode", "thinned_shared or per_replicate");
    };
    const auto fit_flags = [](Overrides& o) {
        o.add("--model", "fit.model", "sgflm or gflm");
        o.add("--p", "fit.p", "truncation level or 'auto' for AIC");
        o.add("--p-max", "fit.p_max", "largest p tried by AIC");
        o.add_eta_bounds();
        o.add("--tol", "fit.tol", "gradient sup-norm tolerance");
        o.add("--max-iter", "fit.max_iter", "Newton iteration limit");
        o.add("--init", "fit.init", "fpcr or zeros");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "simulate one case of replicates");
    Overrides sim_o(simulate);
    common(simulate, sim_o);
    sim_flags(sim_o, false);

    CLI::App* fit = app.add_subcommand("fit", "fit a model to a simulated case");
    Overrides fit_o(fit);
    common(fit, fit_o);
    fit->add_option("--data", data_dir, "case directory (manifest.json)")->required();
    fit_flags(fit_o);

    CLI::App* band = app.add_subcommand("band", "confidence band for beta(t) and eta interval");
    Overrides band_o(band);
    common(band, band_o);
    band->add_option("--data", data_dir, "case directory (manifest.json)")->required();
    band->add_option("--fit", fit_path, "fit.json from the fit subcommand (refit when absent)");
    band->add_flag("--pointwise", pointwise, "pointwise instead of simultaneous band");
    band_o.add("--level", "inference.level", "confidence level");
    fit_flags(band_o);

    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo study over eta values");
    Overrides mc_o(mc);
    common(mc, mc_o);
    sim_flags(mc_o, true);
    mc_o.add("--cases", "mc.cases", "cases per eta (M)");
    mc_o.add("--workers", "mc.workers", "worker threads");
    mc_o.add("--fixed-p", "mc.fixed_p", "fixed truncation level instead of AIC");
    mc_o.add("--level", "inference.level", "confidence level");
    mc_o.add("--p-max", "fit.p_max", "largest p tried by AIC");

    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*simulate)
            return cmd_simulate(resolve(config_path, sim_o), out);
        if (*fit)
            return cmd_fit(resolve(config_path, fit_o), data_dir, out);
        if (*band)
            return cmd_band(resolve(config_path, band_o), data_dir, fit_path, pointwise, out);
        if (*mc)
            return cmd_mc(resolve(config_path, mc_o), out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}

} // namespace sgflm::cli
