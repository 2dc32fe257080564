#include "liftkit/pose_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "liftkit/errors.hpp"

namespace liftkit {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr char kB64Chars[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

json coords_to_json(const auto& m) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(i, c));
    return arr;
}

template <typename M>
M coords_from_json(const json& arr, Eigen::Index rows, Eigen::Index cols, long record) {
    if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols)
        throw ParseError("coordinate array has wrong length", record);
    M m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!arr[k].is_number()) throw ParseError("non-numeric coordinate", record);
            m(i, c) = arr[k++].get<double>();
            if (!std::isfinite(m(i, c))) throw ParseError("non-finite coordinate", record);
        }
    return m;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path);
    return in;
}

json read_header(std::istream& in, const std::string& expected_kind) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header line");
    json h = json::parse(line, nullptr, false);
    if (h.is_discarded() || !h.is_object()) throw ParseError("malformed header");
    for (const char* key : {"version", "kind", "J", "count"})
        if (!h.contains(key)) throw ParseError(std::string("header missing field: ") + key);
    if (h["version"].get<int>() != kFormatVersion)
        throw ParseError("unsupported format version");
    if (h["kind"].get<std::string>() != expected_kind)
        throw ParseError("expected kind '" + expected_kind + "', found '" +
                         h["kind"].get<std::string>() + "'");
    return h;
}

json parse_record(std::istream& in, long index) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("unexpected end of file", index);
    json r = json::parse(line, nullptr, false);
    if (r.is_discarded() || !r.is_object()) throw ParseError("malformed record", index);
    return r;
}

}  // namespace

std::string base64_encode(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        unsigned v = data[i] << 16;
        if (i + 1 < len) v |= data[i + 1] << 8;
        if (i + 2 < len) v |= data[i + 2];
        out.push_back(kB64Chars[(v >> 18) & 63]);
        out.push_back(kB64Chars[(v >> 12) & 63]);
        out.push_back(i + 1 < len ? kB64Chars[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? kB64Chars[v & 63] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) throw ParseError("base64 length not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=') {
                if (k < 2 || (k == 2 && text[i + 3] != '=')) throw ParseError("bad base64 padding");
                vals[k] = 0;
                ++pad;
            } else {
                vals[k] = value_of(c);
                if (vals[k] < 0 || pad > 0) throw ParseError("invalid base64 character");
            }
        }
        const unsigned v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
        out.push_back((v >> 16) & 0xff);
        if (pad < 2) out.push_back((v >> 8) & 0xff);
        if (pad < 1) out.push_back(v & 0xff);
    }
    return out;
}

void write_poses(const std::string& path, const std::vector<PoseSample>& samples) {
    int J = 0, L = 0, d = 0;
    if (!samples.empty()) {
        J = samples.front().pose3d.joints();
        L = samples.front().features.levels;
        d = samples.front().features.dim;
    }
    auto out = open_out(path);
    out << json{{"version", kFormatVersion}, {"kind", "dataset"},
                {"J", J}, {"L", L}, {"d", d},
                {"count", samples.size()}}.dump()
        << '\n';
    long index = 0;
    for (const auto& s : samples) {
        if (s.pose3d.joints() != J || s.pose2d.joints() != J || s.features.joints != J ||
            s.features.levels != L || s.features.dim != d)
            throw ParseError("sample shape differs from header", index);
        s.pose3d.check_finite();
        s.pose2d.check_finite();
        if (!s.features.data.allFinite()) throw ParseError("non-finite feature value", index);
        const auto* bytes = reinterpret_cast<const unsigned char*>(s.features.data.data());
        json r{{"sample_id", s.sample_id},
               {"action_tag", s.action_tag},
               {"pose3d", coords_to_json(s.pose3d.coords)},
               {"pose2d", coords_to_json(s.pose2d.coords)},
               {"features", base64_encode(bytes, sizeof(float) * s.features.data.size())}};
        out << r.dump() << '\n';
        ++index;
    }
}

std::vector<PoseSample> read_poses(const std::string& path) {
    auto in = open_in(path);
    const json h = read_header(in, "dataset");
    for (const char* key : {"L", "d"})
        if (!h.contains(key)) throw ParseError(std::string("header missing field: ") + key);
    const int J = h["J"].get<int>();
    const int L = h["L"].get<int>();
    const int d = h["d"].get<int>();
    const long count = h["count"].get<long>();
    if (count < 0 || (count > 0 && (J < 1 || L < 0 || d < 0)))
        throw ParseError("invalid header dimensions");

    std::vector<PoseSample> samples;
    samples.reserve(count);
    for (long i = 0; i < count; ++i) {
        const json r = parse_record(in, i);
        for (const char* key : {"sample_id", "pose3d", "pose2d", "features"})
            if (!r.contains(key)) throw ParseError(std::string("record missing field: ") + key, i);
        PoseSample s;
        s.sample_id = r["sample_id"].get<std::string>();
        s.action_tag = r.value("action_tag", std::string());
        s.pose3d.coords = coords_from_json<Coords3>(r["pose3d"], J, 3, i);
        s.pose2d.coords = coords_from_json<Coords2>(r["pose2d"], J, 2, i);
        const auto bytes = base64_decode(r["features"].get<std::string>());
        const size_t expected = sizeof(float) * (L + 1) * J * d;
        if (bytes.size() != expected) throw ParseError("feature block has wrong size", i);
        s.features = ConditioningFeatures::zeros(L, J, d);
        std::memcpy(s.features.data.data(), bytes.data(), expected);
        if (!s.features.data.allFinite()) throw ParseError("non-finite feature value", i);
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_hypotheses(const std::string& path, const std::vector<HypothesisSet>& sets) {
    int J = 0, H = 0;
    SamplerConfig cfg;
    if (!sets.empty()) {
        J = sets.front().joints();
        H = sets.front().count();
        cfg = sets.front().config;
    }
    auto out = open_out(path);
    out << json{{"version", kFormatVersion}, {"kind", "hypotheses"},
                {"J", J}, {"L", 0}, {"d", 0}, {"H", H},
                {"count", sets.size()},
                {"sampler", {{"steps", cfg.steps},
                             {"variant", cfg.variant},
                             {"seed", cfg.seed},
                             {"total_steps", cfg.total_steps}}}}.dump()
        << '\n';
    long index = 0;
    for (const auto& hs : sets) {
        if (hs.count() != H || hs.joints() != J)
            throw ParseError("hypothesis set shape differs from header", index);
        json poses = json::array();
        for (const auto& p : hs.poses) {
            if (!p.allFinite()) throw ParseError("non-finite hypothesis", index);
            poses.push_back(coords_to_json(p));
        }
        out << json{{"frame_id", hs.frame_id}, {"hypotheses", poses}}.dump() << '\n';
        ++index;
    }
}

std::vector<HypothesisSet> read_hypotheses(const std::string& path) {
    auto in = open_in(path);
    const json h = read_header(in, "hypotheses");
    if (!h.contains("H") || !h.contains("sampler")) throw ParseError("header missing H/sampler");
    const int J = h["J"].get<int>();
    const int H = h["H"].get<int>();
    const long count = h["count"].get<long>();
    SamplerConfig cfg;
    cfg.hypotheses = H;
    cfg.steps = h["sampler"].value("steps", 0);
    cfg.variant = h["sampler"].value("variant", std::string("ddim"));
    cfg.seed = h["sampler"].value("seed", std::uint64_t(0));
    cfg.total_steps = h["sampler"].value("total_steps", 0);

    std::vector<HypothesisSet> sets;
    sets.reserve(count);
    for (long i = 0; i < count; ++i) {
        const json r = parse_record(in, i);
        if (!r.contains("frame_id") || !r.contains("hypotheses"))
            throw ParseError("record missing frame_id/hypotheses", i);
        HypothesisSet hs;
        hs.frame_id = r["frame_id"].get<std::string>();
        hs.config = cfg;
        const json& arr = r["hypotheses"];
        if (!arr.is_array() || static_cast<int>(arr.size()) != H)
            throw ParseError("hypothesis count differs from header", i);
        hs.poses.reserve(H);
        for (const auto& p : arr) hs.poses.push_back(coords_from_json<Coords3>(p, J, 3, i));
        sets.push_back(std::move(hs));
    }
    return sets;
}

void write_predictions(const std::string& path, const std::vector<PredictedPose>& preds) {
    const int J = preds.empty() ? 0 : preds.front().pose3d.joints();
    auto out = open_out(path);
    out << json{{"version", kFormatVersion}, {"kind", "poses"},
                {"J", J}, {"L", 0}, {"d", 0}, {"count", preds.size()}}.dump()
        << '\n';
    long index = 0;
    for (const auto& p : preds) {
        if (p.pose3d.joints() != J) throw ParseError("pose shape differs from header", index);
        p.pose3d.check_finite();
        out << json{{"frame_id", p.frame_id}, {"pose3d", coords_to_json(p.pose3d.coords)}}.dump()
            << '\n';
        ++index;
    }
}

std::vector<PredictedPose> read_predictions(const std::string& path) {
    auto in = open_in(path);
    const json h = read_header(in, "poses");
    const int J = h["J"].get<int>();
    const long count = h["count"].get<long>();
    std::vector<PredictedPose> preds;
    preds.reserve(count);
    for (long i = 0; i < count; ++i) {
        const json r = parse_record(in, i);
        if (!r.contains("frame_id") || !r.contains("pose3d"))
            throw ParseError("record missing frame_id/pose3d", i);
        PredictedPose p;
        p.frame_id = r["frame_id"].get<std::string>();
        p.pose3d.coords = coords_from_json<Coords3>(r["pose3d"], J, 3, i);
        preds.push_back(std::move(p));
    }
    return preds;
}

}  // namespace liftkit
