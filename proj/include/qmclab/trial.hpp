#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qmclab/errors.hpp"
#include "qmclab/krylov.hpp"
#include "qmclab/model.hpp"
#include "qmclab/spectrum.hpp"

namespace qmclab {

/// exp[lambda sum_i x_i] (|up...up> + |down...down>), unnormalized.
///
/// Per site e^{lambda x} = cosh(lambda) 1 + sinh(lambda) x, so a state with d down spins picks up
/// cosh^{L-d} sinh^d from the all-up reference and sinh^{L-d} cosh^d from the all-down one.
inline double amplitude_symmetric(double lambda, int length, const SpinConfiguration& x) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("amplitude_symmetric: lambda must be >= 0");
    if (x.sites != length) throw std::invalid_argument("amplitude_symmetric: configuration length mismatch");
    const int d = x.down_count();
    const double c = std::cosh(lambda);
    const double s = std::sinh(lambda);
    return std::pow(c, length - d) * std::pow(s, d) + std::pow(s, length - d) * std::pow(c, d);
}

struct SymmetricExponentialTrial {
    double lambda = 0.0;
    int length = 2;

    double amplitude(const SpinConfiguration& x) const { return amplitude_symmetric(lambda, length, x); }
};

// Trial specifications. A missing lambda means "optimize for the model at hand".
struct SymmetricExponentialSpec {
    std::optional<double> lambda;
};
struct ExactGroundSpec {};
struct TableFileSpec {
    std::filesystem::path path;
};
using BaseTrialSpec = std::variant<SymmetricExponentialSpec, ExactGroundSpec, TableFileSpec>;

/// e^{-tau H} applied to a base trial; nesting is excluded by the type.
struct ImaginaryTimeFilteredSpec {
    BaseTrialSpec base;
    double tau = 0.0;
};
using TrialSpec = std::variant<SymmetricExponentialSpec, ExactGroundSpec, ImaginaryTimeFilteredSpec, TableFileSpec>;

inline TrialSpec to_trial_spec(const BaseTrialSpec& base) {
    return std::visit([](const auto& s) -> TrialSpec { return s; }, base);
}

/// Unit-norm dense amplitude table over all 2^L basis states.
class TrialTable {
public:
    TrialTable(int length, std::vector<double> amplitudes, TrialSpec provenance = ExactGroundSpec{},
               nlohmann::json metadata = nlohmann::json::object())
        : length_(length),
          amplitudes_(std::move(amplitudes)),
          provenance_(std::move(provenance)),
          metadata_(std::move(metadata)) {
        if (length < 2 || length > max_encodable_sites) throw std::invalid_argument("TrialTable: bad chain length");
        if (amplitudes_.size() != basis_dimension(length)) {
            throw format_error("TrialTable: expected " + std::to_string(basis_dimension(length)) +
                               " amplitudes, got " + std::to_string(amplitudes_.size()));
        }
        const double n = norm2(amplitudes_);
        if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("TrialTable: amplitudes have zero norm");
        for (double& a : amplitudes_) a /= n;
    }

    int sites() const noexcept { return length_; }
    std::size_t dimension() const noexcept { return amplitudes_.size(); }
    std::span<const double> amplitudes() const noexcept { return amplitudes_; }
    double operator[](Bits x) const noexcept { return amplitudes_[x]; }
    double at(const SpinConfiguration& x) const {
        if (x.sites != length_) throw std::invalid_argument("TrialTable: configuration length mismatch");
        return amplitudes_[x.bits];
    }
    const TrialSpec& provenance() const noexcept { return provenance_; }
    const nlohmann::json& metadata() const noexcept { return metadata_; }

private:
    int length_;
    std::vector<double> amplitudes_;
    TrialSpec provenance_;
    nlohmann::json metadata_;
};

inline double variational_energy(const TrialTable& table, const TfimModel& model) {
    if (table.sites() != model.length) throw std::invalid_argument("variational_energy: table/model length mismatch");
    const auto h = apply_hamiltonian(model, table.amplitudes());
    return dot(table.amplitudes(), h);
}

inline TrialTable symmetric_exponential_table(double lambda, int length, nlohmann::json metadata = {}) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("symmetric exponential trial needs lambda >= 0");
    // Amplitudes depend only on the down count.
    const double c = std::cosh(lambda);
    const double s = std::sinh(lambda);
    std::vector<double> by_down(static_cast<std::size_t>(length) + 1);
    for (int d = 0; d <= length; ++d) {
        by_down[d] = std::pow(c, length - d) * std::pow(s, d) + std::pow(s, length - d) * std::pow(c, d);
    }
    std::vector<double> amps(basis_dimension(length));
    for (std::size_t x = 0; x < amps.size(); ++x) amps[x] = by_down[length - std::popcount(x)];
    if (metadata.is_null()) metadata = nlohmann::json::object();
    metadata["lambda"] = lambda;
    return {length, std::move(amps), SymmetricExponentialSpec{lambda}, std::move(metadata)};
}

struct LambdaWindow {
    double lower = 0.0;
    double upper = 2.0;
};

/// Golden-section minimization of the variational energy over the symmetric exponential family.
inline double optimize_lambda(const TfimModel& model, LambdaWindow window = {}, double width = 1e-6) {
    if (!(window.lower >= 0.0 && window.upper <= 2.0 && window.lower < window.upper)) {
        throw std::invalid_argument("optimize_lambda: window must lie inside [0, 2]");
    }
    auto energy = [&](double lambda) {
        return variational_energy(symmetric_exponential_table(lambda, model.length), model);
    };
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = window.lower;
    double b = window.upper;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = energy(c);
    double fd = energy(d);
    while (b - a > width) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = energy(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = energy(d);
        }
    }
    double best = 0.5 * (a + b);
    double f_best = energy(best);
    // The minimum may sit on the window boundary (e.g. Gamma = 0 gives lambda* = 0).
    for (double edge : {window.lower, window.upper}) {
        const double f_edge = energy(edge);
        if (f_edge <= f_best) {
            best = edge;
            f_best = f_edge;
        }
    }
    return best;
}

// Table file: little-endian {"QMCT", u32 version = 1, u32 L} then 2^L f64 amplitudes.

inline constexpr std::uint32_t table_file_version = 1;

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw format_error("table file truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace detail

struct TableFileContents {
    int length = 0;
    std::vector<double> amplitudes;
};

inline TableFileContents read_table_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open table file " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "QMCT", 4) != 0) throw format_error("bad table file magic");
    const auto version = detail::read_le<std::uint32_t>(in);
    if (version != table_file_version) throw format_error("unsupported table file version " + std::to_string(version));
    const auto length = detail::read_le<std::uint32_t>(in);
    if (length < 2 || length > 30) throw format_error("table file L out of range");
    TableFileContents out{static_cast<int>(length), std::vector<double>(basis_dimension(static_cast<int>(length)))};
    for (double& a : out.amplitudes) a = detail::read_le<double>(in);
    if (in.peek() != std::char_traits<char>::eof()) throw format_error("table file has trailing bytes");
    return out;
}

inline nlohmann::json provenance_json(const TrialSpec& spec);

/// Writes the binary table and a "<path>.json" provenance sidecar.
inline void write_table_file(const std::filesystem::path& path, const TrialTable& table) {
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw format_error("cannot write table file " + path.string());
        out.write("QMCT", 4);
        detail::write_le<std::uint32_t>(out, table_file_version);
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(table.sites()));
        for (double a : table.amplitudes()) detail::write_le<double>(out, a);
    }
    std::ofstream sidecar(path.string() + ".json", std::ios::trunc);
    nlohmann::json meta = {{"L", table.sites()},
                           {"norm", "unit 2-norm"},
                           {"provenance", provenance_json(table.provenance())},
                           {"metadata", table.metadata()}};
    sidecar << meta.dump(2) << '\n';
}

inline nlohmann::json provenance_json(const TrialSpec& spec) {
    struct Visitor {
        nlohmann::json operator()(const SymmetricExponentialSpec& s) const {
            nlohmann::json j = {{"type", "symmetric_exponential"}};
            j["lambda"] = s.lambda ? nlohmann::json(*s.lambda) : nlohmann::json("optimized");
            return j;
        }
        nlohmann::json operator()(const ExactGroundSpec&) const { return {{"type", "exact_ground"}}; }
        nlohmann::json operator()(const TableFileSpec& s) const {
            return {{"type", "table_file"}, {"path", s.path.string()}};
        }
        nlohmann::json operator()(const ImaginaryTimeFilteredSpec& s) const {
            return {{"type", "imaginary_time_filtered"}, {"tau", s.tau}, {"base", provenance_json(to_trial_spec(s.base))}};
        }
    };
    return std::visit(Visitor{}, spec);
}

inline TrialTable build_trial_table(const TrialSpec& spec, const TfimModel& model, const EdOptions& ed = {}) {
    struct Visitor {
        const TfimModel& model;
        const EdOptions& ed;

        TrialTable operator()(const SymmetricExponentialSpec& s) const {
            if (s.lambda) return symmetric_exponential_table(*s.lambda, model.length, {{"lambda_source", "fixed"}});
            const double lambda = optimize_lambda(model);
            return symmetric_exponential_table(lambda, model.length, {{"lambda_source", "optimized"}});
        }
        TrialTable operator()(const ExactGroundSpec& s) const {
            auto ground = exact_ground_ed(model, ed);
            return {model.length, std::move(*ground.ground_vector), s,
                    {{"ground_energy", ground.ground_energy}}};
        }
        TrialTable operator()(const TableFileSpec& s) const {
            auto contents = read_table_file(s.path);
            if (contents.length != model.length) {
                throw format_error("table file " + s.path.string() + " has L = " + std::to_string(contents.length) +
                                   ", model has L = " + std::to_string(model.length));
            }
            return {model.length, std::move(contents.amplitudes), s, {{"path", s.path.string()}}};
        }
        TrialTable operator()(const ImaginaryTimeFilteredSpec& s) const {
            if (!(s.tau >= 0.0)) throw std::invalid_argument("imaginary-time filter needs tau >= 0");
            if (model.length > ed.max_sites()) {
                throw capability_error("imaginary-time filter limited to L <= " + std::to_string(ed.max_sites()));
            }
            const TrialTable base = std::visit(*this, to_trial_spec(s.base));
            auto filtered = imaginary_time_propagate(model, base.amplitudes(), s.tau);
            nlohmann::json meta = {{"tau", s.tau}, {"base", base.metadata()}};
            return {model.length, std::move(filtered), s, std::move(meta)};
        }
    };
    return std::visit(Visitor{model, ed}, spec);
}

}  // namespace qmclab
