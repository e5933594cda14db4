#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmq/errors.hpp"
#include "pmq/grid_builder.hpp"
#include "pmq/version.hpp"

namespace pmq {

/// FNV-1a 64-bit hash of the canonical model parameter string; embedded in
/// grid files so pricing runs can refuse a grid built from other parameters.
inline std::string model_hash(const std::string& fingerprint) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : fingerprint) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

namespace detail {

// All scalar fields are little-endian on disk regardless of host order.
inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& os, double v) {
    put_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline void put_doubles(std::ostream& os, const std::vector<double>& v) {
    put_u64(os, v.size());
    for (double x : v) put_f64(os, x);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw config_error("grid file: truncated");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw config_error("grid file: truncated");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline double get_f64(std::istream& is) {
    return std::bit_cast<double>(get_u64(is));
}

inline std::vector<double> get_doubles(std::istream& is) {
    const std::uint64_t n = get_u64(is);
    if (n > (1ull << 32)) throw config_error("grid file: implausible array length");
    std::vector<double> v(n);
    for (auto& x : v) x = get_f64(is);
    return v;
}

} // namespace detail

inline void write_grid_stream(std::ostream& os, const GridSequence& seq) {
    os.write("PMQG", 4);
    detail::put_u32(os, grid_file_format_version);

    nlohmann::json header;
    header["library_version"] = library_version;
    header["model_id"] = seq.model_id;
    header["model_fingerprint"] = seq.model_fingerprint;
    header["model_hash"] = model_hash(seq.model_fingerprint);
    header["schedule"] = {{"horizon", seq.schedule.horizon},
                          {"steps", seq.schedule.steps},
                          {"codewords", seq.schedule.codewords},
                          {"codewords_per_step", seq.schedule.codewords_per_step}};
    std::vector<std::string> schemes;
    for (Scheme s : seq.schemes) schemes.push_back(scheme_name(s));
    header["schemes"] = schemes;
    const std::string htext = header.dump();
    detail::put_u64(os, htext.size());
    os.write(htext.data(), static_cast<std::streamsize>(htext.size()));

    detail::put_u32(os, static_cast<std::uint32_t>(seq.steps.size()));
    for (const auto& step : seq.steps) {
        detail::put_u32(os, static_cast<std::uint32_t>(step.marginals.size()));
        for (const auto& g : step.marginals) {
            detail::put_doubles(os, g.codewords);
            detail::put_doubles(os, g.weights);
            detail::put_f64(os, g.support.lo);
            detail::put_f64(os, g.support.hi);
        }
        detail::put_doubles(os, step.joint);
        detail::put_doubles(os, step.transition);
        detail::put_u32(os, static_cast<std::uint32_t>(step.reports.size()));
        for (const auto& r : step.reports) {
            detail::put_u32(os, static_cast<std::uint32_t>(r.newton_iters));
            detail::put_u32(os, static_cast<std::uint32_t>(r.lloyd_iters));
            detail::put_u32(os, static_cast<std::uint32_t>(r.hessian_fallbacks));
            detail::put_u32(os, static_cast<std::uint32_t>(r.rejected_steps));
            detail::put_u32(os, static_cast<std::uint32_t>(r.empty_region_merges));
            detail::put_u32(os, r.converged ? 1u : 0u);
            detail::put_f64(os, r.grad_norm);
        }
        detail::put_doubles(os, step.distortions);
    }
}

inline void write_grid_file(const std::string& path, const GridSequence& seq) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw config_error("grid file: cannot open " + path + " for writing");
    write_grid_stream(os, seq);
    if (!os) throw config_error("grid file: write failed for " + path);
}

inline GridSequence read_grid_stream(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PMQG", 4) != 0)
        throw config_error("grid file: bad magic");
    const std::uint32_t version = detail::get_u32(is);
    if (version != grid_file_format_version)
        throw config_error("grid file: unsupported format version " +
                           std::to_string(version));
    const std::uint64_t hlen = detail::get_u64(is);
    std::string htext(hlen, '\0');
    is.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw config_error("grid file: truncated header");
    nlohmann::json header = nlohmann::json::parse(htext);

    GridSequence seq;
    seq.model_id = header.at("model_id").get<std::string>();
    seq.model_fingerprint = header.at("model_fingerprint").get<std::string>();
    seq.schedule.horizon = header.at("schedule").at("horizon").get<double>();
    seq.schedule.steps = header.at("schedule").at("steps").get<int>();
    seq.schedule.codewords =
        header.at("schedule").at("codewords").get<std::vector<int>>();
    seq.schedule.codewords_per_step = header.at("schedule")
                                          .at("codewords_per_step")
                                          .get<std::vector<std::vector<int>>>();
    for (const auto& s : header.at("schemes"))
        seq.schemes.push_back(s.get<std::string>() == "wo2" ? Scheme::wo2
                                                            : Scheme::euler);

    const std::uint32_t nsteps = detail::get_u32(is);
    seq.steps.resize(nsteps);
    for (std::uint32_t k = 0; k < nsteps; ++k) {
        auto& step = seq.steps[k];
        step.index = static_cast<int>(k);
        const std::uint32_t dim = detail::get_u32(is);
        step.marginals.resize(dim);
        for (auto& g : step.marginals) {
            g.codewords = detail::get_doubles(is);
            g.weights = detail::get_doubles(is);
            g.support.lo = detail::get_f64(is);
            g.support.hi = detail::get_f64(is);
        }
        step.joint = detail::get_doubles(is);
        step.transition = detail::get_doubles(is);
        const std::uint32_t nrep = detail::get_u32(is);
        step.reports.resize(nrep);
        for (auto& r : step.reports) {
            r.newton_iters = static_cast<int>(detail::get_u32(is));
            r.lloyd_iters = static_cast<int>(detail::get_u32(is));
            r.hessian_fallbacks = static_cast<int>(detail::get_u32(is));
            r.rejected_steps = static_cast<int>(detail::get_u32(is));
            r.empty_region_merges = static_cast<int>(detail::get_u32(is));
            r.converged = detail::get_u32(is) != 0;
            r.grad_norm = detail::get_f64(is);
        }
        step.distortions = detail::get_doubles(is);
    }
    return seq;
}

inline GridSequence read_grid_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw config_error("grid file: cannot open " + path);
    return read_grid_stream(is);
}

/// Lossless text export (hex floats) for diffing grid files.
inline void write_grid_text(std::ostream& os, const GridSequence& seq) {
    os << "pmq-grid-text 1\n";
    os << "model " << seq.model_id << ' ' << model_hash(seq.model_fingerprint) << '\n';
    os << "fingerprint " << seq.model_fingerprint << '\n';
    os << std::hexfloat;
    os << "schedule " << seq.schedule.horizon << ' ' << std::dec
       << seq.schedule.steps;
    for (int n : seq.schedule.codewords) os << ' ' << n;
    os << '\n';
    os << "schemes";
    for (Scheme s : seq.schemes) os << ' ' << scheme_name(s);
    os << '\n';
    auto dump = [&os](const char* tag, const std::vector<double>& v) {
        os << tag;
        os << std::hexfloat;
        for (double x : v) os << ' ' << x;
        os << '\n';
    };
    for (const auto& step : seq.steps) {
        os << "step " << std::dec << step.index << '\n';
        for (std::size_t n = 0; n < step.marginals.size(); ++n) {
            os << "dim " << std::dec << n << '\n';
            dump("codewords", step.marginals[n].codewords);
            dump("weights", step.marginals[n].weights);
        }
        dump("joint", step.joint);
        dump("transition", step.transition);
    }
}

} // namespace pmq
