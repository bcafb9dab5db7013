#include "fluidest/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace fluidest {

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
    return bytes;
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* s, std::size_t n) { bytes.insert(bytes.end(), s, s + n); }

    std::vector<unsigned char> bytes;
};

class Reader {
public:
    Reader(const std::vector<unsigned char>& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n)
            throw FormatError(what_ + ": truncated, expected " + std::to_string(pos_ + n) + " bytes but the file has " +
                                  std::to_string(bytes_.size()),
                              pos_);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<unsigned char>& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_flow(const std::filesystem::path& path, const VectorField2D& u) {
    if (u.height() < 1 || u.width() < 1) throw DimensionError("write_flow: empty field");
    Writer w;
    w.f32(kFlowMagic);
    w.i32(u.width());
    w.i32(u.height());
    for (int y = 0; y < u.height(); ++y)
        for (int x = 0; x < u.width(); ++x) {
            w.f32(static_cast<float>(u.u(x, y)));
            w.f32(static_cast<float>(u.v(x, y)));
        }
    write_bytes(path, w.bytes);
}

VectorField2D read_flow(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    Reader r(bytes, "read_flow '" + path.string() + "'");
    const float magic = r.f32();
    if (magic != kFlowMagic) throw FormatError("read_flow '" + path.string() + "': bad magic tag", 0);
    const std::int32_t w = r.i32(), h = r.i32();
    if (w <= 0 || h <= 0) throw FormatError("read_flow '" + path.string() + "': non-positive dimensions", 4);
    const std::uint64_t payload = static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h) * 8u;
    if (payload > r.remaining())
        throw FormatError("read_flow '" + path.string() + "': truncated, expected " + std::to_string(12 + payload) +
                              " bytes but the file has " + std::to_string(bytes.size()),
                          bytes.size());
    if (payload < r.remaining())
        throw FormatError("read_flow '" + path.string() + "': trailing bytes after the payload", 12 + payload);
    VectorField2D u(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            u.u(x, y) = r.f32();
            u.v(x, y) = r.f32();
        }
    return u;
}

std::size_t count_non_finite(const VectorField2D& u) {
    std::size_t n = 0;
    for (const ScalarField2D* c : {&u.u, &u.v})
        for (double v : c->data())
            if (!std::isfinite(v)) ++n;
    return n;
}

void write_image(const std::filesystem::path& path, const ScalarField2D& f) {
    if (f.height() < 1 || f.width() < 1) throw DimensionError("write_image: empty image");
    for (double v : f.data())
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("write_image: samples must lie in [0, 1]");
    const std::string header = "P5\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n65535\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    bytes.reserve(bytes.size() + 2 * f.data().size());
    for (double v : f.data()) {
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        bytes.push_back(static_cast<unsigned char>(q >> 8));
        bytes.push_back(static_cast<unsigned char>(q & 0xff));
    }
    write_bytes(path, bytes);
}

ScalarField2D read_image(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    const std::string what = "read_image '" + path.string() + "'";
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto number = [&]() -> long {
        skip_space();
        const std::size_t start = pos;
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > (1L << 30)) throw FormatError(what + ": header value too large", start);
            ++pos;
        }
        if (pos == start) throw FormatError(what + ": malformed header", start);
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError(what + ": not a binary PGM (P5)", 0);
    pos = 2;
    const long w = number(), h = number();
    const std::size_t maxval_at = pos;
    const long maxval = number();
    if (w <= 0 || h <= 0) throw FormatError(what + ": non-positive dimensions", 2);
    if (maxval != 65535) throw FormatError(what + ": maxval " + std::to_string(maxval) + ", expected 65535", maxval_at);
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(what + ": malformed header", pos);
    ++pos;
    const std::uint64_t payload = static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h) * 2u;
    if (bytes.size() - pos < payload)
        throw FormatError(what + ": truncated, expected " + std::to_string(pos + payload) + " bytes but the file has " +
                              std::to_string(bytes.size()),
                          bytes.size());
    ScalarField2D f(static_cast<int>(h), static_cast<int>(w));
    for (double& v : f.data()) {
        v = static_cast<double>((static_cast<unsigned>(bytes[pos]) << 8) | bytes[pos + 1]) / 65535.0;
        pos += 2;
    }
    return f;
}

void write_params(const std::filesystem::path& path, const CorrectorParams& p) {
    p.validate();
    Writer w;
    w.raw("FECP", 4);
    w.u32(kParamsVersion);
    w.u32(static_cast<std::uint32_t>(p.gamma.order));
    w.u32(static_cast<std::uint32_t>(p.gate.size));
    w.u32(static_cast<std::uint32_t>(p.gate.w_e.size()));
    w.u32(static_cast<std::uint32_t>(p.gamma.cu.size()));
    w.f64(p.nu);
    w.f64(p.dt);
    for (double v : p.flatten()) w.f64(v);
    write_bytes(path, w.bytes);
}

CorrectorParams read_params(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    const std::string what = "read_params '" + path.string() + "'";
    Reader r(bytes, what);
    r.need(4);
    if (std::string(bytes.begin(), bytes.begin() + 4) != "FECP") throw FormatError(what + ": bad magic tag", 0);
    r.u32();
    const std::uint32_t version = r.u32();
    if (version != kParamsVersion)
        throw FormatError(what + ": unsupported version " + std::to_string(version) + " (this build reads version " +
                              std::to_string(kParamsVersion) + ")",
                          4);
    const std::uint32_t order = r.u32(), size = r.u32(), n_gate = r.u32(), n_gamma = r.u32();
    if (order < 1 || order > kMaxDerivativeOrder + 1) throw FormatError(what + ": unsupported order", 8);
    if (size < 1 || size % 2 == 0 || size > 99) throw FormatError(what + ": invalid gate size", 12);
    if (n_gate != 4 * size * size) throw FormatError(what + ": gate weight count does not match the gate size", 16);
    if (n_gamma != order * (order + 1) / 2)
        throw FormatError(what + ": expected " + std::to_string(order * (order + 1) / 2) +
                              " coefficients per component for order " + std::to_string(order) + ", found " +
                              std::to_string(n_gamma),
                          20);
    CorrectorParams p = CorrectorParams::initial(static_cast<int>(size), static_cast<int>(order));
    p.nu = r.f64();
    p.dt = r.f64();
    std::vector<double> theta(p.trainable_count());
    for (double& v : theta) v = r.f64();
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after the payload", r.pos());
    p.assign(theta);
    try {
        p.validate();
    } catch (const ConfigError& e) {
        throw FormatError(what + ": " + e.what(), 24);
    }
    return p;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

DatasetOptions DatasetSettings::options() const {
    DatasetOptions o;
    o.preset.height = height;
    o.preset.width = width;
    o.preset.speed = speed;
    o.steps_per_frame = steps_per_frame;
    o.warmup_steps = warmup_steps;
    o.particles = particles;
    o.particle_sigma = particle_sigma;
    o.particle_intensity = particle_intensity;
    o.margin = margin;
    return o;
}

CorrectorParams CorrectorSettings::initial_params() const { return CorrectorParams::initial(gate_size, order, nu, dt); }

TrainOptions CorrectorSettings::train_options() const {
    TrainOptions t;
    t.epochs = epochs;
    t.step = step;
    t.lambda_d = lambda_d;
    return t;
}

SimConfig SimulationSettings::config() const {
    SimConfig c;
    c.nu = nu;
    c.rho = rho;
    c.dt = dt;
    c.tolerance = tolerance;
    c.max_iterations = max_iterations;
    c.tracer_diffusion = tracer_diffusion;
    return c;
}

void RunConfig::validate() const {
    predictor.validate();
    corrector.initial_params();
    corrector.train_options().validate();
    simulation.config().validate();
    parse_preset(dataset.preset);
    if (dataset.height < 16 || dataset.width < 16) throw ConfigError("dataset: height and width must be >= 16");
    if (!(dataset.speed >= 0.0)) throw ConfigError("dataset: speed must be >= 0");
    if (dataset.frames < 2) throw ConfigError("dataset: frames must be >= 2");
    if (dataset.steps_per_frame < 1 || dataset.warmup_steps < 0 || dataset.particles < 0)
        throw ConfigError("dataset: invalid step or particle counts");
    if (!(dataset.particle_sigma > 0.0) || !(dataset.particle_intensity > 0.0 && dataset.particle_intensity <= 1.0) ||
        !(dataset.margin >= 0.0))
        throw ConfigError("dataset: invalid particle settings");
}

namespace {

struct Binding {
    const char* section;
    const char* key;
    double* real = nullptr;
    int* integer = nullptr;
    std::string* text = nullptr;
    std::uint64_t* u64 = nullptr;
};

std::vector<Binding> bindings(RunConfig& c) {
    auto& p = c.predictor;
    auto& k = c.corrector;
    auto& s = c.simulation;
    auto& d = c.dataset;
    return {
        {"", "seed", nullptr, nullptr, nullptr, &c.seed},
        {"predictor", "lambda_s", &p.lambda_s},
        {"predictor", "lambda_d", &p.lambda_d},
        {"predictor", "gamma", &p.gamma},
        {"predictor", "epsilon", &p.epsilon},
        {"predictor", "levels", nullptr, &p.levels},
        {"predictor", "iterations", nullptr, &p.iterations},
        {"predictor", "step", &p.step},
        {"predictor", "beta1", &p.beta1},
        {"predictor", "beta2", &p.beta2},
        {"corrector", "gate_size", nullptr, &k.gate_size},
        {"corrector", "order", nullptr, &k.order},
        {"corrector", "nu", &k.nu},
        {"corrector", "dt", &k.dt},
        {"corrector", "epochs", nullptr, &k.epochs},
        {"corrector", "step", &k.step},
        {"corrector", "lambda_d", &k.lambda_d},
        {"simulation", "nu", &s.nu},
        {"simulation", "rho", &s.rho},
        {"simulation", "dt", &s.dt},
        {"simulation", "tolerance", &s.tolerance},
        {"simulation", "max_iterations", nullptr, &s.max_iterations},
        {"simulation", "tracer_diffusion", &s.tracer_diffusion},
        {"dataset", "preset", nullptr, nullptr, &d.preset},
        {"dataset", "height", nullptr, &d.height},
        {"dataset", "width", nullptr, &d.width},
        {"dataset", "speed", &d.speed},
        {"dataset", "frames", nullptr, &d.frames},
        {"dataset", "steps_per_frame", nullptr, &d.steps_per_frame},
        {"dataset", "warmup_steps", nullptr, &d.warmup_steps},
        {"dataset", "particles", nullptr, &d.particles},
        {"dataset", "particle_sigma", &d.particle_sigma},
        {"dataset", "particle_intensity", &d.particle_intensity},
        {"dataset", "margin", &d.margin},
    };
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <class T>
T parse_value(const std::string& v, const std::string& where) {
    T out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("run config " + where + ": invalid number '" + v + "'");
    return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("run config line " + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig cfg;
    const auto table = bindings(cfg);
    const auto assign = [&](const std::string& section, const std::string& key, const std::string& raw) {
        const Binding* b = nullptr;
        for (const auto& t : table)
            if (section == t.section && key == t.key) b = &t;
        const std::string where = section.empty() ? key : "[" + section + "] " + key;
        if (!b) throw ConfigError("run config: unknown key '" + where + "'");
        const std::string value = trim(raw);
        if (b->real) *b->real = parse_value<double>(value, where);
        if (b->integer) *b->integer = parse_value<int>(value, where);
        if (b->u64) *b->u64 = parse_value<std::uint64_t>(value, where);
        if (b->text) *b->text = value;
    };
    for (const auto& [name, node] : tree) {
        const bool section = name == "predictor" || name == "corrector" || name == "simulation" || name == "dataset";
        if (!section && node.empty()) {
            assign("", name, node.data());
            continue;
        }
        if (!section) throw ConfigError("run config: unknown section [" + name + "]");
        for (const auto& [key, leaf] : node) assign(name, key, leaf.data());
    }
    cfg.validate();
    return cfg;
}

RunConfig read_run_config(const std::filesystem::path& path) { return parse_run_config(read_text(path)); }

std::string format_run_config(const RunConfig& cfg) {
    RunConfig copy = cfg;
    std::string out, section;
    for (const auto& b : bindings(copy)) {
        if (b.section != section) {
            section = b.section;
            out += "\n[" + section + "]\n";
        }
        out += std::string(b.key) + " = ";
        if (b.real) out += format_number(*b.real);
        if (b.integer) out += std::to_string(*b.integer);
        if (b.u64) out += std::to_string(*b.u64);
        if (b.text) out += *b.text;
        out += "\n";
    }
    return out;
}

void write_run_config(const std::filesystem::path& path, const RunConfig& cfg) { write_text(path, format_run_config(cfg)); }

void write_metric_csv(const std::filesystem::path& path, const MetricReport& report) {
    std::string out = "frame,aepe,aae,div_mean,div_max\n";
    for (const auto& f : report.frames)
        out += std::to_string(f.frame) + "," + format_number(f.aepe) + "," + format_number(f.aae) + "," +
               format_number(f.div_mean) + "," + format_number(f.div_max) + "\n";
    write_text(path, out);
}

MetricReport read_metric_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line) || trim(line) != "frame,aepe,aae,div_mean,div_max")
        throw FormatError("read_metric_csv '" + path.string() + "': unexpected header", 0);
    MetricReport r;
    std::size_t offset = line.size() + 1;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            offset += line.size() + 1;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(trim(line));
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (cells.size() != 5) throw FormatError("read_metric_csv '" + path.string() + "': expected 5 columns", offset);
        try {
            r.frames.push_back({parse_value<int>(cells[0], ""), parse_value<double>(cells[1], ""), parse_value<double>(cells[2], ""),
                                parse_value<double>(cells[3], ""), parse_value<double>(cells[4], "")});
        } catch (const ConfigError&) {
            throw FormatError("read_metric_csv '" + path.string() + "': invalid number", offset);
        }
        offset += line.size() + 1;
    }
    return r;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
        out += "\n";
    }
    write_text(path, out);
}

}  // namespace fluidest
