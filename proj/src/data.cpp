#include "mcinet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mcinet::data {

namespace fs = std::filesystem;

std::string label_name(Label l) { return l == Label::normal ? "normal" : "mci"; }

std::string plane_name(Plane p) {
    switch (p) {
        case Plane::frontal: return "frontal";
        case Plane::sagittal: return "sagittal";
        case Plane::axial: return "axial";
    }
    return "?";
}

static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

Label label_from_string(const std::string& s) {
    const std::string l = lower(s);
    if (l == "normal") return Label::normal;
    if (l == "mci") return Label::mci;
    throw std::invalid_argument("unknown label '" + s + "' (expected normal|mci)");
}

Plane plane_from_string(const std::string& s) {
    const std::string l = lower(s);
    if (l == "frontal") return Plane::frontal;
    if (l == "sagittal") return Plane::sagittal;
    if (l == "axial") return Plane::axial;
    throw std::invalid_argument("unknown plane '" + s + "' (expected frontal|sagittal|axial)");
}

std::map<std::string, std::size_t> DatasetManifest::class_summary() const {
    std::map<std::string, std::size_t> out{{"normal", 0}, {"mci", 0}};
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (seen.insert(r.subject_id).second) out[label_name(r.label)]++;
    }
    return out;
}

std::vector<std::string> DatasetManifest::subject_ids() const {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& r : records)
        if (seen.insert(r.subject_id).second) ids.push_back(r.subject_id);
    return ids;
}

Label DatasetManifest::subject_label(const std::string& subject_id) const {
    for (const auto& r : records)
        if (r.subject_id == subject_id) return r.label;
    throw std::invalid_argument("unknown subject '" + subject_id + "'");
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_manifest: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("load_manifest: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "subject_id,label,plane,image_path")
        throw std::runtime_error("load_manifest: bad header '" + line + "' in " + path);
    DatasetManifest m;
    std::set<std::pair<std::string, std::string>> seen;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 4)
            throw std::runtime_error("load_manifest: line " + std::to_string(lineno) +
                                     ": expected 4 fields, got " + std::to_string(fields.size()));
        SubjectRecord r;
        r.subject_id = fields[0];
        if (r.subject_id.empty())
            throw std::runtime_error("load_manifest: line " + std::to_string(lineno) +
                                     ": empty subject id");
        try {
            r.label = label_from_string(fields[1]);
            r.plane = plane_from_string(fields[2]);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("load_manifest: line " + std::to_string(lineno) + ": " + e.what());
        }
        r.image_path = fields[3];
        if (!fs::exists(r.image_path))
            throw std::runtime_error("load_manifest: line " + std::to_string(lineno) +
                                     ": image file not found: " + r.image_path);
        if (!seen.insert({r.subject_id, fields[2]}).second)
            throw std::runtime_error("load_manifest: line " + std::to_string(lineno) +
                                     ": duplicate (subject, plane) pair " + r.subject_id + "/" +
                                     fields[2]);
        m.records.push_back(std::move(r));
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_manifest: cannot open " + path);
    os << "subject_id,label,plane,image_path\n";
    for (const auto& r : m.records)
        os << r.subject_id << ',' << label_name(r.label) << ',' << plane_name(r.plane) << ','
           << r.image_path << '\n';
}

// ---- split ----

SplitResult subject_split(const DatasetManifest& m, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("subject_split: fraction must be in (0,1)");
    std::vector<std::string> by_class[2];
    std::set<std::string> seen;
    for (const auto& r : m.records)
        if (seen.insert(r.subject_id).second)
            by_class[static_cast<int>(r.label)].push_back(r.subject_id);

    std::mt19937_64 rng(seed);
    std::set<std::string> train_ids;
    for (auto& ids : by_class) {
        // Fisher-Yates with explicit draws, stable across standard libraries
        for (std::size_t i = ids.size(); i > 1; --i)
            std::swap(ids[i - 1], ids[rng() % i]);
        const std::size_t n_train = static_cast<std::size_t>(fraction * static_cast<double>(ids.size()));
        for (std::size_t i = 0; i < n_train; ++i) train_ids.insert(ids[i]);
    }
    SplitResult s;
    s.seed = seed;
    for (const auto& r : m.records)
        (train_ids.count(r.subject_id) ? s.train : s.test).records.push_back(r);
    return s;
}

std::uint64_t split_fingerprint(const SplitResult& s) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const std::string& str) {
        for (unsigned char c : str) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    mix("train:");
    auto train_ids = s.train.subject_ids();
    std::sort(train_ids.begin(), train_ids.end());
    for (const auto& id : train_ids) mix(id + ";");
    mix("test:");
    auto test_ids = s.test.subject_ids();
    std::sort(test_ids.begin(), test_ids.end());
    for (const auto& id : test_ids) mix(id + ";");
    return h;
}

// ---- image IO ----

namespace {

int next_pnm_token(std::istream& is) {
    // skips whitespace and '#' comments, returns the next integer
    while (true) {
        const int c = is.peek();
        if (c == '#') {
            std::string dummy;
            std::getline(is, dummy);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int v = -1;
    is >> v;
    return v;
}

} // namespace

Tensor decode_image(const std::string& path) {
    if (path.size() > 3 && path.substr(path.size() - 3) == ".nt") {
        Tensor t = load_nt(path);
        if (t.rank() != 4 || t.dim(0) != 1)
            throw std::runtime_error("decode_image: .nt tensor must be 1xCxHxW, got " + t.shape_str() +
                                     " in " + path);
        return t;
    }
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("decode_image: cannot open " + path);
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw std::runtime_error("decode_image: unsupported magic in " + path +
                                 " (expected P5 or P6)");
    const std::size_t channels = (m1 == '6') ? 3 : 1;
    const int w = next_pnm_token(is);
    const int h = next_pnm_token(is);
    const int maxval = next_pnm_token(is);
    if (w <= 0 || h <= 0) throw std::runtime_error("decode_image: bad dimensions in " + path);
    if (maxval != 255) throw std::runtime_error("decode_image: maxval must be 255 in " + path);
    is.get(); // single whitespace before payload
    const std::size_t npix = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    std::vector<unsigned char> raw(npix);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(npix));
    if (static_cast<std::size_t>(is.gcount()) != npix)
        throw std::runtime_error("decode_image: truncated payload in " + path);
    Tensor t({1, channels, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    // PNM is interleaved; tensor is planar
    for (std::size_t y = 0; y < static_cast<std::size_t>(h); ++y)
        for (std::size_t x = 0; x < static_cast<std::size_t>(w); ++x)
            for (std::size_t c = 0; c < channels; ++c)
                t.at(0, c, y, x) = static_cast<double>(raw[(y * w + x) * channels + c]) / 255.0;
    return t;
}

void write_pgm(const std::string& path, const std::vector<std::uint8_t>& pixels, std::size_t height,
               std::size_t width) {
    if (pixels.size() != height * width)
        throw std::invalid_argument("write_pgm: pixel count does not match dimensions");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
    os << "P5\n" << width << " " << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w) {
    if (img.rank() != 4 || img.dim(0) != 1)
        throw std::invalid_argument("resize_bilinear: expected 1xCxHxW, got " + img.shape_str());
    const std::size_t C = img.dim(1), H = img.dim(2), W = img.dim(3);
    if (out_h == H && out_w == W) return img;
    Tensor out({1, C, out_h, out_w});
    const double sy = static_cast<double>(H) / static_cast<double>(out_h);
    const double sx = static_cast<double>(W) / static_cast<double>(out_w);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(H - 1));
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const std::size_t y1 = std::min(y0 + 1, H - 1);
            const double wy = fy - static_cast<double>(y0);
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
                fx = std::clamp(fx, 0.0, static_cast<double>(W - 1));
                const std::size_t x0 = static_cast<std::size_t>(fx);
                const std::size_t x1 = std::min(x0 + 1, W - 1);
                const double wx = fx - static_cast<double>(x0);
                const double v00 = img.at(0, c, y0, x0), v01 = img.at(0, c, y0, x1);
                const double v10 = img.at(0, c, y1, x0), v11 = img.at(0, c, y1, x1);
                out.at(0, c, oy, ox) = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                                       wy * ((1.0 - wx) * v10 + wx * v11);
            }
        }
    return out;
}

Tensor to_network_input(const Tensor& img, std::size_t out_h, std::size_t out_w,
                        const NormStats& stats) {
    Tensor r = resize_bilinear(img, out_h, out_w);
    const std::size_t plane = out_h * out_w;
    Tensor out({1, 3, out_h, out_w});
    for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src = r.dim(1) == 1 ? 0 : c;
        const double* p = r.data() + src * plane;
        double* q = out.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - stats.mean[c]) / stats.stddev[c];
    }
    return out;
}

NormStats compute_norm_stats(const DatasetManifest& m, std::size_t out_h, std::size_t out_w) {
    NormStats s;
    if (m.records.empty()) return s;
    double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
    std::size_t n = 0;
    const NormStats identity;
    for (const auto& r : m.records) {
        const Tensor t = to_network_input(decode_image(r.image_path), out_h, out_w, identity);
        const std::size_t plane = out_h * out_w;
        for (std::size_t c = 0; c < 3; ++c) {
            const double* p = t.data() + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum[c] += p[i];
                sq[c] += p[i] * p[i];
            }
        }
        n += plane;
    }
    for (std::size_t c = 0; c < 3; ++c) {
        s.mean[c] = sum[c] / static_cast<double>(n);
        const double var = sq[c] / static_cast<double>(n) - s.mean[c] * s.mean[c];
        if (var > 0.0) {
            s.stddev[c] = std::sqrt(var);
        } else {
            s.stddev[c] = 1.0;
            s.degenerate = true;
        }
    }
    return s;
}

std::vector<Batch> batches(const DatasetManifest& m, std::size_t batch_size,
                           std::uint64_t shuffle_seed, std::size_t out_h, std::size_t out_w,
                           const NormStats& stats) {
    if (batch_size == 0) throw std::invalid_argument("batches: batch size must be positive");
    std::vector<std::size_t> order(m.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(shuffle_seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    std::vector<Batch> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, order.size() - start);
        Batch b;
        b.images = Tensor({n, 3, out_h, out_w});
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ri = order[start + i];
            const auto& rec = m.records[ri];
            const Tensor img = to_network_input(decode_image(rec.image_path), out_h, out_w, stats);
            std::copy(img.data(), img.data() + img.numel(), b.images.data() + i * 3 * out_h * out_w);
            b.labels.push_back(static_cast<std::size_t>(rec.label));
            b.record_indices.push_back(ri);
        }
        out.push_back(std::move(b));
    }
    return out;
}

// ---- synthetic corpus ----

DatasetManifest synth_dataset(std::size_t n_per_class, std::uint64_t seed, const std::string& out_dir,
                              std::size_t image_size) {
    fs::create_directories(out_dir);
    DatasetManifest m;
    const std::size_t S = image_size;
    const Plane planes[] = {Plane::frontal, Plane::sagittal, Plane::axial};
    for (int cls = 0; cls < 2; ++cls) {
        const bool mci = cls == 1;
        for (std::size_t s = 0; s < n_per_class; ++s) {
            std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + cls * 1000003ull + s);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            std::normal_distribution<double> noise(0.0, 8.0);
            const double cx = 0.5 * S + u(rng) * 0.05 * S;
            const double cy = 0.5 * S + u(rng) * 0.05 * S;
            const double brightness = u(rng) * 6.0;
            const double r1 = 0.18 * S + u(rng) * 0.02 * S;
            const double r2 = 0.32 * S + u(rng) * 0.02 * S;
            const double ring_w = 0.04 * S;
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "%s_%03zu", mci ? "mci" : "normal", s);
            const std::string subject_id = idbuf;
            for (int pi = 0; pi < 3; ++pi) {
                std::vector<std::uint8_t> img(S * S);
                for (std::size_t y = 0; y < S; ++y)
                    for (std::size_t x = 0; x < S; ++x) {
                        // per-plane orientation: stretch the pattern along a
                        // different axis for each slice direction
                        double dx = (static_cast<double>(x) - cx) / S;
                        double dy = (static_cast<double>(y) - cy) / S;
                        if (pi == 1) std::swap(dx, dy);
                        const double ax = pi == 2 ? 1.35 : 1.0;
                        const double d = std::sqrt((ax * dx) * (ax * dx) + dy * dy) * S;
                        double v = 35.0 + 190.0 * std::exp(-(d * d) / (2.0 * 0.3 * S * 0.3 * S));
                        if (mci) {
                            if (std::fabs(d - r1) < ring_w || std::fabs(d - r2) < ring_w) v -= 85.0;
                        }
                        v += brightness + noise(rng);
                        img[y * S + x] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
                    }
                const std::string path =
                    (fs::path(out_dir) / (subject_id + "_" + plane_name(planes[pi]) + ".pgm")).string();
                write_pgm(path, img, S, S);
                SubjectRecord rec;
                rec.subject_id = subject_id;
                rec.label = mci ? Label::mci : Label::normal;
                rec.plane = planes[pi];
                rec.image_path = path;
                m.records.push_back(std::move(rec));
            }
        }
    }
    save_manifest(m, (fs::path(out_dir) / "manifest.csv").string());
    return m;
}

} // namespace mcinet::data
