#include "sgflm/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sgflm/errors.hpp"

namespace sgflm::io {

namespace {

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    return out;
}

json read_json(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

json vector_to_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vector_from_json(const json& a)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = a.at(i).get<double>();
    return v;
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep))
        out.push_back(field);
    if (!line.empty() && line.back() == sep)
        out.emplace_back();
    return out;
}

std::string trim(std::string s)
{
    while (!s.empty() && (s.back() == '\r' || s.back() == ' '))
        s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && s[b] == ' ')
        ++b;
    return s.substr(b);
}

} // namespace

json Provenance::to_json() const
{
    return json{{"config_hash", config_hash}, {"seed", seed}};
}

std::string Provenance::csv_comment() const
{
    return "# config_hash=" + config_hash + " seed=" + std::to_string(seed);
}

std::string fnv1a_hex(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

CsvTable read_csv(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path.string());
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line.front() == '#')
            continue;
        const auto fields = split(line, ',');
        if (table.header.empty()) {
            for (const auto& f : fields)
                table.header.push_back(trim(f));
            continue;
        }
        if (fields.size() != table.header.size())
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected "
                            + std::to_string(table.header.size()) + " fields");
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            const std::string s = trim(f);
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || end != s.c_str() + s.size())
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad number '"
                                + s + "'");
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty())
        throw DataError(path.string() + ": missing header");
    return table;
}

void write_function_csv(const fs::path& path, const FunctionGrid& f, const Provenance& prov)
{
    auto out = open_out(path);
    out << prov.csv_comment() << "\n";
    out << "t,value\n";
    for (Eigen::Index k = 0; k < f.size(); ++k)
        out << format_double(f.grid_points()[k]) << "," << format_double(f.values()[k]) << "\n";
}

FunctionGrid read_function_csv(const fs::path& path)
{
    const CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"t", "value"})
        throw DataError(path.string() + ": expected header t,value");
    Eigen::VectorXd grid(static_cast<Eigen::Index>(t.rows.size()));
    Eigen::VectorXd vals(grid.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        grid[static_cast<Eigen::Index>(r)] = t.rows[r][0];
        vals[static_cast<Eigen::Index>(r)] = t.rows[r][1];
    }
    try {
        return FunctionGrid(grid, vals);
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

json lattice_to_json(const LatticeSpec& spec)
{
    return json{{"rows", spec.rows},
                {"cols", spec.cols},
                {"wrap", spec.wrap},
                {"neighborhood_kind", to_string(spec.kind)}};
}

LatticeSpec lattice_from_json(const json& j)
{
    LatticeSpec spec;
    spec.rows = j.at("rows").get<int>();
    spec.cols = j.at("cols").get<int>();
    spec.wrap = j.at("wrap").get<bool>();
    spec.kind = parse_neighborhood(j.at("neighborhood_kind").get<std::string>());
    return spec;
}

json theta_to_json(const Theta& theta, bool include_eta)
{
    json j;
    if (include_eta)
        j["eta"] = theta.eta;
    j["alpha"] = theta.alpha;
    j["beta"] = vector_to_json(theta.beta);
    return j;
}

Theta theta_from_json(const json& j)
{
    Theta t;
    t.eta = j.contains("eta") ? j.at("eta").get<double>() : 0.0;
    t.alpha = j.at("alpha").get<double>();
    t.beta = vector_from_json(j.at("beta"));
    return t;
}

json dataset_meta_to_json(const Dataset& d)
{
    return json{
        {"lattice", lattice_to_json(d.lattice.spec())},
        {"n_sites", d.num_sites()},
        {"basis",
         {{"family", "trigonometric"},
          {"J", d.meta.basis_size},
          {"grid_points", d.meta.grid_points},
          {"grid", "uniform, endpoints included"},
          {"quadrature", "trapezoid"}}},
        {"centering", {{"centered", d.meta.centered}, {"xbar_scores", vector_to_json(d.meta.xbar_scores)}}},
        {"seed", d.meta.seed},
        {"replicate", d.meta.replicate},
        {"chain_mode", d.meta.chain_mode},
        {"sweep_order", d.meta.sweep_order},
    };
}

void write_dataset(const fs::path& dir, const std::string& stem, const Dataset& d,
                   const Provenance& prov)
{
    {
        auto out = open_out(dir / (stem + "_scores.csv"));
        out << prov.csv_comment() << "\n";
        for (int j = 0; j < d.num_scores(); ++j)
            out << (j ? "," : "") << "eps" << (j + 1);
        out << "\n";
        for (int i = 0; i < d.num_sites(); ++i) {
            for (int j = 0; j < d.num_scores(); ++j)
                out << (j ? "," : "") << format_double(d.scores(i, j));
            out << "\n";
        }
    }
    {
        auto out = open_out(dir / (stem + "_responses.csv"));
        out << prov.csv_comment() << "\n";
        out << "site,y\n";
        for (int i = 0; i < d.num_sites(); ++i)
            out << i << "," << static_cast<int>(d.responses[i]) << "\n";
    }
    json meta = dataset_meta_to_json(d);
    meta["provenance"] = prov.to_json();
    auto out = open_out(dir / (stem + "_meta.json"));
    out << meta.dump(2) << "\n";
}

Dataset read_dataset(const fs::path& scores_csv, const fs::path& responses_csv,
                     const fs::path& meta_json)
{
    const json meta = read_json(meta_json);
    try {
        const LatticeSpec spec = lattice_from_json(meta.at("lattice"));
        Lattice lattice(spec);
        const int n = lattice.size();

        const CsvTable sc = read_csv(scores_csv);
        const int big_j = static_cast<int>(sc.header.size());
        for (int j = 0; j < big_j; ++j)
            if (sc.header[j] != "eps" + std::to_string(j + 1))
                throw DataError(scores_csv.string() + ": expected header eps1..epsJ");
        if (static_cast<int>(sc.rows.size()) != n)
            throw DataError(scores_csv.string() + ": expected " + std::to_string(n) + " rows");
        Eigen::MatrixXd scores(n, big_j);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < big_j; ++j)
                scores(i, j) = sc.rows[i][j];

        const CsvTable rs = read_csv(responses_csv);
        if (rs.header != std::vector<std::string>{"site", "y"})
            throw DataError(responses_csv.string() + ": expected header site,y");
        if (static_cast<int>(rs.rows.size()) != n)
            throw DataError(responses_csv.string() + ": expected " + std::to_string(n) + " rows");
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            if (rs.rows[i][0] != i)
                throw DataError(responses_csv.string() + ": sites must be listed in order");
            y[i] = rs.rows[i][1];
        }

        Dataset d{std::move(lattice), std::move(scores), std::move(y), {}};
        const json& basis = meta.at("basis");
        d.meta.basis_size = basis.at("J").get<int>();
        d.meta.grid_points = basis.at("grid_points").get<int>();
        d.meta.centered = meta.at("centering").at("centered").get<bool>();
        d.meta.xbar_scores = vector_from_json(meta.at("centering").at("xbar_scores"));
        d.meta.seed = meta.at("seed").get<std::uint64_t>();
        d.meta.replicate = meta.at("replicate").get<int>();
        d.meta.chain_mode = meta.value("chain_mode", "");
        d.meta.sweep_order = meta.value("sweep_order", "row-major");
        if (d.meta.basis_size != big_j)
            throw DataError(meta_json.string() + ": basis J disagrees with score columns");
        d.validate();
        return d;
    } catch (const json::exception& e) {
        throw DataError(meta_json.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(meta_json.string() + ": " + e.what());
    }
}

void write_case(const fs::path& dir, const MCCase& mc, const Provenance& prov,
                const json& resolved_config)
{
    json files = json::array();
    for (std::size_t k = 0; k < mc.datasets.size(); ++k) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "rep%03zu", k);
        write_dataset(dir, stem, mc.datasets[k], prov);
        files.push_back({{"scores", std::string(stem) + "_scores.csv"},
                         {"responses", std::string(stem) + "_responses.csv"},
                         {"meta", std::string(stem) + "_meta.json"}});
    }
    json manifest{{"format", "sgflm-case"},
                  {"replicates", mc.datasets.size()},
                  {"case_seed", mc.case_seed},
                  {"files", files},
                  {"config", resolved_config},
                  {"provenance", prov.to_json()}};
    auto out = open_out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

std::vector<Dataset> read_case(const fs::path& dir)
{
    const json manifest = read_json(dir / "manifest.json");
    std::vector<Dataset> data;
    try {
        for (const auto& f : manifest.at("files"))
            data.push_back(read_dataset(dir / f.at("scores").get<std::string>(),
                                        dir / f.at("responses").get<std::string>(),
                                        dir / f.at("meta").get<std::string>()));
    } catch (const json::exception& e) {
        throw DataError((dir / "manifest.json").string() + ": " + e.what());
    }
    if (data.empty())
        throw DataError(dir.string() + ": manifest lists no replicates");
    for (const auto& d : data)
        if (!(d.lattice.spec() == data.front().lattice.spec())
            || d.num_scores() != data.front().num_scores())
            throw DataError(dir.string() + ": replicates disagree on lattice or basis");
    return data;
}

json fit_to_json(const FitResult& fit, double alpha_raw, const Provenance& prov)
{
    const bool spatial = fit.model == ModelKind::sgflm;
    json table = json::array();
    for (const auto& row : fit.per_p_table) {
        json r{{"p", row.p}, {"converged", row.converged}};
        r["aic"] = std::isfinite(row.aic) ? json(row.aic) : json(nullptr);
        r["loglik"] = std::isfinite(row.loglik) ? json(row.loglik) : json(nullptr);
        table.push_back(r);
    }
    return json{{"model", to_string(fit.model)},
                {"theta_hat", theta_to_json(fit.theta_hat, spatial)},
                {"alpha_uncentered", alpha_raw},
                {"p", fit.p_selected},
                {"q", fit.q},
                {"aic", fit.aic},
                {"loglik", fit.loglik},
                {"per_p_table", table},
                {"diagnostics",
                 {{"converged", fit.converged},
                  {"n_iterations", fit.n_iterations},
                  {"grad_inf_norm", fit.grad_inf_norm},
                  {"message", fit.message}}},
                {"provenance", prov.to_json()}};
}

FitResult fit_from_json(const json& j)
{
    try {
        FitResult fit;
        fit.model = parse_model_kind(j.at("model").get<std::string>());
        fit.theta_hat = theta_from_json(j.at("theta_hat"));
        fit.p_selected = j.at("p").get<int>();
        fit.q = j.value("q", 0);
        fit.aic = j.value("aic", 0.0);
        fit.loglik = j.value("loglik", 0.0);
        fit.converged = j.at("diagnostics").at("converged").get<bool>();
        if (fit.theta_hat.p() != fit.p_selected)
            throw DataError("fit JSON: beta length disagrees with p");
        return fit;
    } catch (const json::exception& e) {
        throw DataError(std::string("fit JSON: ") + e.what());
    }
}

void write_band_csv(const fs::path& path, const ConfidenceBand& band, const Provenance& prov,
                    const Eigen::VectorXd* truth)
{
    auto out = open_out(path);
    out << prov.csv_comment() << " level=" << format_double(band.level)
        << " type=" << (band.simultaneous ? "simultaneous" : "pointwise") << "\n";
    out << "t,center,lower,upper" << (truth ? ",truth" : "") << "\n";
    for (Eigen::Index k = 0; k < band.grid_points.size(); ++k) {
        out << format_double(band.grid_points[k]) << "," << format_double(band.center[k]) << ","
            << format_double(band.lower[k]) << "," << format_double(band.upper[k]);
        if (truth)
            out << "," << format_double((*truth)[k]);
        out << "\n";
    }
}

json sandwich_summary(const SandwichMatrices& sw)
{
    const auto mat = [](const Eigen::MatrixXd& m) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            rows.push_back(vector_to_json(m.row(r).transpose()));
        return rows;
    };
    json j{{"cond_H", sw.cond_H}, {"cond_J", sw.cond_J}, {"G_inv", mat(sw.G_inv)}};
    if (sw.has_eta)
        j["G11_inv"] = sw.G11_inv;
    j["G22_inv"] = mat(sw.G22_inv);
    return j;
}

void write_table1_csv(const fs::path& path, std::span<const MCReport> reports,
                      const Provenance& prov)
{
    static const std::vector<std::pair<std::string, std::string>> rows{
        {"E_M(eta)", "E_eta"},        {"MSE_M(eta)", "MSE_eta"},   {"E_M(alpha)", "E_alpha"},
        {"MSE_M(alpha)", "MSE_alpha"}, {"MISE_M(beta)", "MISE_beta"}, {"IV_M(beta)", "IV_beta"},
        {"CI_M(eta)", "CI_eta"},      {"FMSE_M", "FMSE"},
    };
    auto out = open_out(path);
    out << prov.csv_comment() << "\n";
    out << "metric";
    for (const char* model : {"GFLM", "SGFLM"})
        for (const auto& r : reports)
            out << "," << model << "_eta" << format_double(r.sim.true_theta.eta);
    out << "\n";
    const auto cell = [](const MetricTable& t, const std::string& key) {
        const auto it = t.find(key);
        return it == t.end() ? std::string("-") : format_double(it->second);
    };
    for (const auto& [label, key] : rows) {
        out << label;
        for (const auto& r : reports)
            out << "," << cell(r.gflm, key);
        for (const auto& r : reports)
            out << "," << cell(r.sgflm, key);
        out << "\n";
    }
    out << "failed_cases";
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& r : reports)
            out << "," << r.failed_cases;
    out << "\n";
}

void write_cases_jsonl(std::ostream& out, const MCReport& report)
{
    const auto model_json = [](const ModelRecord& m, bool spatial) {
        json j{{"theta_hat", theta_to_json(m.theta_hat, spatial)},
               {"alpha_uncentered", m.alpha_raw},
               {"p", m.p},
               {"converged", m.converged},
               {"loglik", m.loglik},
               {"fmse", m.fmse}};
        if (m.ci)
            j["ci_eta"] = {m.ci->first, m.ci->second};
        return j;
    };
    for (const auto& c : report.cases) {
        json j{{"eta_true", report.sim.true_theta.eta},
               {"case", c.index},
               {"seed", c.seed},
               {"attempts", c.attempts},
               {"ok", c.ok}};
        if (c.ok) {
            j["sgflm"] = model_json(c.sgflm, true);
            j["gflm"] = model_json(c.gflm, false);
        } else {
            j["failure"] = c.failure;
        }
        out << j.dump() << "\n";
    }
}

json sim_config_to_json(const SimConfig& sim)
{
    return json{{"lattice", lattice_to_json(sim.lattice)},
                {"true_theta", theta_to_json(sim.true_theta)},
                {"basis_size", sim.basis_size},
                {"grid_points", sim.grid_points()},
                {"score_sd", vector_to_json(sim.resolved_score_sd())},
                {"burn_in", sim.burn_in},
                {"thin", sim.thin},
                {"replicates", sim.replicates},
                {"seed", sim.seed},
                {"chain_mode", to_string(sim.chain_mode)},
                {"sweep_order", "row-major"}};
}

json fit_config_to_json(const FitConfig& fit)
{
    json j{{"p_candidates", fit.p_candidates},
           {"eta_bounds", {fit.eta_low, fit.eta_high}},
           {"max_iter", fit.max_iter},
           {"grad_tol", fit.grad_tol},
           {"step_halving_max", fit.step_halving_max},
           {"init_mode", to_string(fit.init_mode)},
           {"eta_max", fit.eta_max}};
    if (fit.fixed_eta)
        j["fixed_eta"] = *fit.fixed_eta;
    return j;
}

} // namespace sgflm::io
