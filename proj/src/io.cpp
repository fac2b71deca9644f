#include "alm/io.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace alm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open " + p.string());
    return in;
}

}  // namespace

double parse_tenor(const std::string& name) {
    if (name.size() < 2) throw ParseError("bad tenor name '" + name + "'");
    const char unit = static_cast<char>(std::tolower(static_cast<unsigned char>(name.back())));
    std::size_t used = 0;
    double n = 0.0;
    try {
        n = std::stod(name.substr(0, name.size() - 1), &used);
    } catch (const std::exception&) {
        throw ParseError("bad tenor name '" + name + "'");
    }
    if (used != name.size() - 1 || !(n > 0.0)) throw ParseError("bad tenor name '" + name + "'");
    if (unit == 'm') return n / 12.0;
    if (unit == 'y') return n;
    throw ParseError("bad tenor name '" + name + "'");
}

nlohmann::json read_json(const std::filesystem::path& p) {
    auto in = open_in(p);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
    write_text(p, j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        if (ec) throw ConfigError("cannot create " + p.parent_path().string());
    }
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << s;
    if (!out) throw ConfigError("write failed for " + p.string());
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw ParseError(file + ": missing column '" + name + "'");
}

double CsvTable::number(std::size_t row, int col) const {
    const std::string& cell = rows.at(row).at(static_cast<std::size_t>(col));
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != cell.size())
        throw ParseError(file + ":" + std::to_string(lines.at(row)) + ": not a number '" + cell + "'");
    return v;
}

CsvTable read_csv(const std::filesystem::path& p) {
    auto in = open_in(p);
    CsvTable t;
    t.file = p.string();
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty() || trim(line)[0] == '#') continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = cells;
            continue;
        }
        if (cells.size() != t.header.size())
            throw ParseError(t.file + ":" + std::to_string(n) + ": expected " +
                             std::to_string(t.header.size()) + " fields");
        t.rows.push_back(std::move(cells));
        t.lines.push_back(n);
    }
    if (t.header.empty()) throw ParseError(t.file + ": empty file");
    return t;
}

CapletSurface read_surface_csv(const std::filesystem::path& p) {
    const CsvTable t = read_csv(p);
    const int ct = t.column("tenor"), cm = t.column("maturity"), ck = t.column("strike"),
              cv = t.column("vol");
    CapletSurface s;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        s.quotes.push_back({t.rows[r][static_cast<std::size_t>(ct)], t.number(r, cm), t.number(r, ck),
                            t.number(r, cv)});
    if (s.quotes.empty()) throw ParseError(t.file + ": no quotes");
    return s;
}

std::string surface_csv(const CapletSurface& s) {
    std::ostringstream os;
    os.precision(17);
    os << "tenor,maturity,strike,vol\n";
    for (const CapletQuote& q : s.quotes)
        os << q.tenor << ',' << q.maturity << ',' << q.strike << ',' << q.vol << '\n';
    return os.str();
}

CurveSet curves_from_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    try {
        if (j.contains("discounts") && j.contains("libor")) return curveset_from_json(j);
        const double fine = j.at("fine_step").get<double>();
        const double terminal = j.at("terminal").get<double>();
        if (j.contains("discounts_csv")) {
            const CsvTable d = read_csv(base_dir / j.at("discounts_csv").get<std::string>());
            std::vector<std::pair<double, double>> disc;
            const int cm = d.column("maturity"), cd = d.column("discount");
            for (std::size_t r = 0; r < d.rows.size(); ++r) disc.emplace_back(d.number(r, cm), d.number(r, cd));
            const CsvTable l = read_csv(base_dir / j.at("libor_csv").get<std::string>());
            const int lt = l.column("tenor"), le = l.column("maturity_end"), lr = l.column("rate");
            std::map<std::string, std::vector<std::pair<double, double>>> lib;
            for (std::size_t r = 0; r < l.rows.size(); ++r)
                lib[l.rows[r][static_cast<std::size_t>(lt)]].emplace_back(l.number(r, le), l.number(r, lr));
            return curveset_from_tables(disc, lib, fine, terminal);
        }
        const NelsonSiegelParams ois = ns_from_json(j.at("ois"));
        std::map<std::string, NelsonSiegelParams> ns;
        std::map<std::string, TenorGrid> grids;
        for (auto it = j.at("tenors").begin(); it != j.at("tenors").end(); ++it) {
            ns[it.key()] = ns_from_json(it.value());
            grids[it.key()] = make_grid(parse_tenor(it.key()), fine, terminal);
        }
        return build_curveset(ois, ns, grids, j.value("require_positive", false));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("curve configuration: ") + e.what());
    }
}

}  // namespace alm
