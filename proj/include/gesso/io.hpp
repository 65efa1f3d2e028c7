#pragma once
#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>
#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>
#include <json.hpp>
#include <gesso/simdata.hpp>
#include <gesso/solver.hpp>
#include <gesso/tuning.hpp>

namespace gesso {
namespace io {

using json = nlohmann::json;

enum class Format
{
    csv,
    bin,
};

inline Format parse_format(const std::string& s)
{
    if (s == "csv") return Format::csv;
    if (s == "bin") return Format::bin;
    throw value_error("unknown data format '" + s + "' (expected csv or bin)");
}

/// Format from the file extension: ".bin" is binary, anything else CSV.
inline Format guess_format(const std::string& path)
{
    const auto dot = path.rfind('.');
    if (dot != std::string::npos && path.substr(dot) == ".bin") return Format::bin;
    return Format::csv;
}

// ---------------------------------------------------------------------------
// CSV: header row, then columns Y, E, G_1 .. G_p.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace detail

inline RawData read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw io_error(path + ": empty file (header row required)");
    const auto header = detail::split(line);
    if (header.size() < 3) throw io_error(path + ": need columns Y, E and at least one G column");
    const std::size_t cols = header.size();
    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split(line);
        if (fields.size() != cols) {
            throw io_error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                           " fields, found " + std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < cols; ++c) {
            const auto f = fields[c];
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) {
                throw io_error(path + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 1) +
                               ": cannot parse '" + std::string(f) + "'");
            }
            if (!std::isfinite(v)) {
                throw io_error(path + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 1) +
                               ": non-finite value");
            }
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw io_error(path + ": no data rows");
    RawData d;
    const index_t n = static_cast<index_t>(rows), p = static_cast<index_t>(cols - 2);
    d.y.resize(n);
    d.e.resize(n);
    d.g.resize(n, p);
    for (index_t r = 0; r < n; ++r) {
        const double* row = values.data() + r * static_cast<index_t>(cols);
        d.y[r] = row[0];
        d.e[r] = row[1];
        for (index_t j = 0; j < p; ++j) d.g(r, j) = row[2 + j];
    }
    return d;
}

inline void write_csv(const std::string& path, const RawData& d)
{
    std::ofstream out(path);
    if (!out) throw io_error("cannot write '" + path + "'");
    out << "y,e";
    for (index_t j = 0; j < d.p(); ++j) out << ",g" << (j + 1);
    out << '\n';
    for (index_t r = 0; r < d.n(); ++r) {
        out << detail::format_double(d.y[r]) << ',' << detail::format_double(d.e[r]);
        for (index_t j = 0; j < d.p(); ++j) out << ',' << detail::format_double(d.g(r, j));
        out << '\n';
    }
    if (!out) throw io_error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Binary: 32-byte header then float64 payload, all little-endian.
//   bytes 0-7   magic "GESSO1\0\0"
//   bytes 8-15  n (uint64)
//   bytes 16-23 p (uint64)
//   bytes 24-31 element type tag (uint64, 1 = float64)
//   payload     G row-major (n * p), then Y (n), then E (n)
// ---------------------------------------------------------------------------

inline constexpr char binary_magic[8] = {'G', 'E', 'S', 'S', 'O', '1', '\0', '\0'};
inline constexpr std::uint64_t dtype_float64 = 1;
inline constexpr std::size_t binary_header_size = 32;

namespace detail {

template <class T>
T from_le(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

template <class T>
T read_le(const unsigned char* p)
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return from_le(v);
}

template <class T>
void write_le(std::ostream& out, T v)
{
    v = from_le(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

/// Read-only private mapping of a whole file.
class MappedFile
{
public:
    explicit MappedFile(const std::string& path)
    {
        fd_ = ::open(path.c_str(), O_RDONLY);
        if (fd_ < 0) throw io_error("cannot open '" + path + "'");
        struct stat st{};
        if (::fstat(fd_, &st) != 0) {
            ::close(fd_);
            throw io_error("cannot stat '" + path + "'");
        }
        size_ = static_cast<std::size_t>(st.st_size);
        if (size_ > 0) {
            void* addr = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd_, 0);
            if (addr == MAP_FAILED) {
                ::close(fd_);
                throw io_error("cannot map '" + path + "'");
            }
            data_ = static_cast<const unsigned char*>(addr);
        }
    }
    MappedFile(const MappedFile&) = delete;
    MappedFile& operator=(const MappedFile&) = delete;
    ~MappedFile()
    {
        if (data_) ::munmap(const_cast<unsigned char*>(data_), size_);
        if (fd_ >= 0) ::close(fd_);
    }

    const unsigned char* data() const { return data_; }
    std::size_t size() const { return size_; }

private:
    int fd_ = -1;
    const unsigned char* data_ = nullptr;
    std::size_t size_ = 0;
};

} // namespace detail

inline RawData read_binary(const std::string& path)
{
    const detail::MappedFile file(path);
    if (file.size() < binary_header_size) throw io_error(path + ": truncated header");
    const unsigned char* base = file.data();
    if (std::memcmp(base, binary_magic, sizeof(binary_magic)) != 0) throw io_error(path + ": bad magic (not a GESSO1 file)");
    const auto n = detail::read_le<std::uint64_t>(base + 8);
    const auto p = detail::read_le<std::uint64_t>(base + 16);
    const auto tag = detail::read_le<std::uint64_t>(base + 24);
    if (tag != dtype_float64) throw io_error(path + ": unsupported element type tag " + std::to_string(tag));
    if (n == 0 || p == 0) throw io_error(path + ": empty matrix");
    const std::uint64_t count = n * p + 2 * n;
    if (count / n < p || file.size() - binary_header_size != 8 * count) {
        throw io_error(path + ": payload is " + std::to_string(file.size() - binary_header_size) + " bytes, expected " +
                       std::to_string(8 * count));
    }
    RawData d;
    const auto nn = static_cast<index_t>(n), pp = static_cast<index_t>(p);
    d.g.resize(nn, pp);
    d.y.resize(nn);
    d.e.resize(nn);
    const unsigned char* payload = base + binary_header_size;
    for (index_t r = 0; r < nn; ++r) {
        for (index_t j = 0; j < pp; ++j) d.g(r, j) = detail::read_le<double>(payload + 8 * (r * pp + j));
    }
    const unsigned char* yp = payload + 8 * n * p;
    const unsigned char* ep = yp + 8 * n;
    for (index_t r = 0; r < nn; ++r) {
        d.y[r] = detail::read_le<double>(yp + 8 * r);
        d.e[r] = detail::read_le<double>(ep + 8 * r);
    }
    return d;
}

inline void write_binary(const std::string& path, const RawData& d)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write '" + path + "'");
    out.write(binary_magic, sizeof(binary_magic));
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(d.n()));
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(d.p()));
    detail::write_le<std::uint64_t>(out, dtype_float64);
    for (index_t r = 0; r < d.n(); ++r) {
        for (index_t j = 0; j < d.p(); ++j) detail::write_le<double>(out, d.g(r, j));
    }
    for (index_t r = 0; r < d.n(); ++r) detail::write_le<double>(out, d.y[r]);
    for (index_t r = 0; r < d.n(); ++r) detail::write_le<double>(out, d.e[r]);
    if (!out) throw io_error("write failed for '" + path + "'");
}

inline RawData read_raw(const std::string& path, Format fmt)
{
    return fmt == Format::csv ? read_csv(path) : read_binary(path);
}

inline void write_raw(const std::string& path, const RawData& d, Format fmt)
{
    fmt == Format::csv ? write_csv(path, d) : write_binary(path, d);
}

/// Load and standardize per options; all errors surface before a dataset exists.
inline Dataset load_dataset(const std::string& path, Format fmt, const DatasetOptions& opts = {})
{
    return Dataset::from_raw(read_raw(path, fmt), opts);
}

// ---------------------------------------------------------------------------
// JSON result document (schema version "1").
// ---------------------------------------------------------------------------

inline constexpr const char* schema_version = "1";
inline constexpr double sparse_threshold = 1e-8;

using SparseVector = std::vector<std::pair<index_t, double>>;

struct CellRecord
{
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double beta0 = 0.0;
    double beta_e = 0.0;
    SparseVector beta_g;
    SparseVector beta_gxe;
    FitMeta meta;
};

struct GridRecord
{
    double lambda_max = 0.0;
    std::vector<double> lambda1;
    std::vector<double> lambda2;
};

struct CvRecord
{
    int folds = 0;
    std::uint64_t seed = 0;
    std::vector<double> mean_loss;
    std::vector<double> se_loss;
    std::size_t best_cell = 0;
    double best_lambda1 = 0.0;
    double best_lambda2 = 0.0;
};

struct SelectionRecord
{
    int runs = 0;
    SparseVector rate_g;
    SparseVector rate_gxe;
    std::vector<index_t> top_gxe; ///< interaction indices by rank
};

struct ResultDocument
{
    std::string command;
    SolverConfig solver;
    index_t n = 0;
    index_t p = 0;
    bool standardized = true;
    bool timing = true;
    std::optional<GridRecord> grid;
    std::vector<CellRecord> fits;
    std::optional<CvRecord> cv;
    std::optional<SelectionRecord> selection;
};

inline SparseVector to_sparse(const vec_t& v, double threshold = sparse_threshold)
{
    SparseVector s;
    for (index_t i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > threshold) s.emplace_back(i, v[i]);
    }
    return s;
}

inline CellRecord make_cell_record(const PenaltyPair& pen, const SparseCoefficients& c, const FitMeta& meta)
{
    CellRecord r;
    r.lambda1 = pen.lambda1;
    r.lambda2 = pen.lambda2;
    r.beta0 = c.beta0;
    r.beta_e = c.beta_e;
    for (std::size_t k = 0; k < c.index.size(); ++k) {
        if (std::abs(c.beta_g[k]) > sparse_threshold) r.beta_g.emplace_back(c.index[k], c.beta_g[k]);
        if (std::abs(c.beta_gxe[k]) > sparse_threshold) r.beta_gxe.emplace_back(c.index[k], c.beta_gxe[k]);
    }
    r.meta = meta;
    r.meta.radius_trace.clear();
    r.meta.primal_trace.clear();
    return r;
}

/// Coefficients of a stored cell (blocks below the storage threshold read back as zero).
inline SparseCoefficients to_sparse_coefficients(const CellRecord& r)
{
    std::map<index_t, std::pair<double, double>> blocks;
    for (const auto& [i, v] : r.beta_g) blocks[i].first = v;
    for (const auto& [i, v] : r.beta_gxe) blocks[i].second = v;
    SparseCoefficients c;
    c.beta0 = r.beta0;
    c.beta_e = r.beta_e;
    for (const auto& [i, bt] : blocks) {
        c.index.push_back(i);
        c.beta_g.push_back(bt.first);
        c.beta_gxe.push_back(bt.second);
    }
    return c;
}

inline json sparse_to_json(const SparseVector& s)
{
    json arr = json::array();
    for (const auto& [i, v] : s) arr.push_back(json::array({i, v}));
    return arr;
}

inline SparseVector sparse_from_json(const json& j)
{
    SparseVector s;
    for (const auto& e : j) s.emplace_back(e.at(0).get<index_t>(), e.at(1).get<double>());
    return s;
}

inline json config_to_json(const SolverConfig& c)
{
    return json{{"tol", c.tol},
                {"tol_relative", c.tol_relative},
                {"max_iter_outer", c.max_iter_outer},
                {"max_iter_inner", c.max_iter_inner},
                {"ws_init_size", c.ws_init_size},
                {"use_working_set", c.use_working_set},
                {"use_screening", c.use_screening},
                {"use_active_set", c.use_active_set},
                {"use_adaptive_maxdiff", c.use_adaptive_maxdiff}};
}

inline SolverConfig config_from_json(const json& j)
{
    SolverConfig c;
    c.tol = j.at("tol").get<double>();
    c.tol_relative = j.at("tol_relative").get<bool>();
    c.max_iter_outer = j.at("max_iter_outer").get<long>();
    c.max_iter_inner = j.at("max_iter_inner").get<long>();
    c.ws_init_size = j.at("ws_init_size").get<index_t>();
    c.use_working_set = j.at("use_working_set").get<bool>();
    c.use_screening = j.at("use_screening").get<bool>();
    c.use_active_set = j.at("use_active_set").get<bool>();
    c.use_adaptive_maxdiff = j.at("use_adaptive_maxdiff").get<bool>();
    return c;
}

inline json meta_to_json(const FitMeta& m, bool timing)
{
    json j{{"primal", m.primal},
           {"dual", m.dual},
           {"gap", m.gap},
           {"tol_gap", m.tol_gap},
           {"iters_outer", m.iters_outer},
           {"iters_inner", m.iters_inner},
           {"gap_checks", m.gap_checks},
           {"failed_certifications", m.failed_certifications},
           {"ws_size_final", m.ws_size_final},
           {"ws_size_max", m.ws_size_max},
           {"screened_out", m.screened_out},
           {"converged", m.converged}};
    if (timing) j["elapsed_seconds"] = m.elapsed_seconds;
    return j;
}

inline FitMeta meta_from_json(const json& j)
{
    FitMeta m;
    m.primal = j.at("primal").get<double>();
    m.dual = j.at("dual").get<double>();
    m.gap = j.at("gap").get<double>();
    m.tol_gap = j.at("tol_gap").get<double>();
    m.iters_outer = j.at("iters_outer").get<long>();
    m.iters_inner = j.at("iters_inner").get<long>();
    m.gap_checks = j.at("gap_checks").get<long>();
    m.failed_certifications = j.at("failed_certifications").get<long>();
    m.ws_size_final = j.at("ws_size_final").get<index_t>();
    m.ws_size_max = j.at("ws_size_max").get<index_t>();
    m.screened_out = j.at("screened_out").get<index_t>();
    m.converged = j.at("converged").get<bool>();
    if (j.contains("elapsed_seconds")) m.elapsed_seconds = j.at("elapsed_seconds").get<double>();
    return m;
}

inline json to_json(const ResultDocument& d)
{
    json j;
    j["schema_version"] = schema_version;
    j["command"] = d.command;
    j["solver"] = config_to_json(d.solver);
    j["dataset"] = json{{"n", d.n}, {"p", d.p}, {"standardized", d.standardized}};
    j["timing"] = d.timing;
    if (d.grid) {
        j["grid"] = json{{"lambda_max", d.grid->lambda_max}, {"lambda1", d.grid->lambda1}, {"lambda2", d.grid->lambda2}};
    }
    json fits = json::array();
    for (const auto& c : d.fits) {
        fits.push_back(json{{"lambda1", c.lambda1},
                            {"lambda2", c.lambda2},
                            {"beta0", c.beta0},
                            {"beta_e", c.beta_e},
                            {"beta_g", sparse_to_json(c.beta_g)},
                            {"beta_gxe", sparse_to_json(c.beta_gxe)},
                            {"meta", meta_to_json(c.meta, d.timing)}});
    }
    j["fits"] = std::move(fits);
    if (d.cv) {
        j["cv"] = json{{"folds", d.cv->folds},
                       {"seed", d.cv->seed},
                       {"mean_loss", d.cv->mean_loss},
                       {"se_loss", d.cv->se_loss},
                       {"best_cell", d.cv->best_cell},
                       {"best_lambda1", d.cv->best_lambda1},
                       {"best_lambda2", d.cv->best_lambda2}};
    }
    if (d.selection) {
        j["selection"] = json{{"runs", d.selection->runs},
                              {"rate_g", sparse_to_json(d.selection->rate_g)},
                              {"rate_gxe", sparse_to_json(d.selection->rate_gxe)},
                              {"top_gxe", d.selection->top_gxe}};
    }
    return j;
}

inline ResultDocument from_json(const json& j)
{
    if (!j.contains("schema_version") || j.at("schema_version").get<std::string>() != schema_version) {
        throw io_error("result document: unsupported schema version");
    }
    ResultDocument d;
    d.command = j.at("command").get<std::string>();
    d.solver = config_from_json(j.at("solver"));
    d.n = j.at("dataset").at("n").get<index_t>();
    d.p = j.at("dataset").at("p").get<index_t>();
    d.standardized = j.at("dataset").at("standardized").get<bool>();
    d.timing = j.at("timing").get<bool>();
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        d.grid = GridRecord{g.at("lambda_max").get<double>(), g.at("lambda1").get<std::vector<double>>(),
                            g.at("lambda2").get<std::vector<double>>()};
    }
    for (const auto& c : j.at("fits")) {
        CellRecord r;
        r.lambda1 = c.at("lambda1").get<double>();
        r.lambda2 = c.at("lambda2").get<double>();
        r.beta0 = c.at("beta0").get<double>();
        r.beta_e = c.at("beta_e").get<double>();
        r.beta_g = sparse_from_json(c.at("beta_g"));
        r.beta_gxe = sparse_from_json(c.at("beta_gxe"));
        r.meta = meta_from_json(c.at("meta"));
        d.fits.push_back(std::move(r));
    }
    if (j.contains("cv")) {
        const auto& c = j.at("cv");
        CvRecord r;
        r.folds = c.at("folds").get<int>();
        r.seed = c.at("seed").get<std::uint64_t>();
        r.mean_loss = c.at("mean_loss").get<std::vector<double>>();
        r.se_loss = c.at("se_loss").get<std::vector<double>>();
        r.best_cell = c.at("best_cell").get<std::size_t>();
        r.best_lambda1 = c.at("best_lambda1").get<double>();
        r.best_lambda2 = c.at("best_lambda2").get<double>();
        d.cv = std::move(r);
    }
    if (j.contains("selection")) {
        const auto& s = j.at("selection");
        SelectionRecord r;
        r.runs = s.at("runs").get<int>();
        r.rate_g = sparse_from_json(s.at("rate_g"));
        r.rate_gxe = sparse_from_json(s.at("rate_gxe"));
        r.top_gxe = s.at("top_gxe").get<std::vector<index_t>>();
        d.selection = std::move(r);
    }
    return d;
}

inline std::string dump(const ResultDocument& d) { return to_json(d).dump(2) + "\n"; }

inline ResultDocument parse_document(const std::string& text)
{
    try {
        return from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw io_error(std::string("result document: ") + e.what());
    }
}

inline std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw io_error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Simulation truth document.
// ---------------------------------------------------------------------------

inline json truth_to_json(const SimTruth& t, const SimSpec& spec)
{
    return json{{"schema_version", schema_version},
                {"mode", to_string(t.mode)},
                {"n", spec.n},
                {"p", spec.p},
                {"seed", spec.seed},
                {"main_support", t.main_support},
                {"interaction_support", t.interaction_support},
                {"beta_g", sparse_to_json(to_sparse(t.beta_g, 0.0))},
                {"beta_gxe", sparse_to_json(to_sparse(t.beta_gxe, 0.0))},
                {"beta0", t.beta0},
                {"beta_e", t.beta_e},
                {"noise_variance", t.noise_variance},
                {"realized_snr", t.realized_snr}};
}

/// Truth plus the number of predictors it refers to.
inline std::pair<SimTruth, index_t> truth_from_json(const json& j)
{
    try {
        SimTruth t;
        const auto p = j.at("p").get<index_t>();
        t.mode = parse_sim_mode(j.at("mode").get<std::string>());
        t.main_support = j.at("main_support").get<std::vector<index_t>>();
        t.interaction_support = j.at("interaction_support").get<std::vector<index_t>>();
        t.beta_g = vec_t::Zero(p);
        t.beta_gxe = vec_t::Zero(p);
        auto fill = [&](vec_t& dst, const json& src) {
            for (const auto& [i, v] : sparse_from_json(src)) {
                if (i < 0 || i >= p) throw io_error("truth document: index " + std::to_string(i) + " out of range");
                dst[i] = v;
            }
        };
        fill(t.beta_g, j.at("beta_g"));
        fill(t.beta_gxe, j.at("beta_gxe"));
        t.beta0 = j.at("beta0").get<double>();
        t.beta_e = j.at("beta_e").get<double>();
        t.noise_variance = j.at("noise_variance").get<double>();
        t.realized_snr = j.at("realized_snr").get<double>();
        return {t, p};
    } catch (const json::exception& e) {
        throw io_error(std::string("truth document: ") + e.what());
    }
}

} // namespace io
} // namespace gesso
