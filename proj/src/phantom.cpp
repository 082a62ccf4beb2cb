#include "phantom.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "error.hpp"
#include "keyvalue.hpp"

namespace lesionquant {

namespace fs = std::filesystem;

double EllipseSpec::rho(double x, double y) const {
    const double cs = std::cos(angle), sn = std::sin(angle);
    const double dx = x - cx, dy = y - cy;
    const double lx = cs * dx + sn * dy;
    const double ly = -sn * dx + cs * dy;
    return std::sqrt((lx / a) * (lx / a) + (ly / b) * (ly / b));
}

double EllipseSpec::coverage(double x, double y) const {
    const double cs = std::cos(angle), sn = std::sin(angle);
    const double dx = x - cx, dy = y - cy;
    const double lx = cs * dx + sn * dy;
    const double ly = -sn * dx + cs * dy;
    const double r = std::sqrt((lx / a) * (lx / a) + (ly / b) * (ly / b));
    if (r < 0.5) return 1.0;
    const double grad = std::sqrt((lx / (a * a)) * (lx / (a * a)) + (ly / (b * b)) * (ly / (b * b))) / r;
    return std::clamp(0.5 - (r - 1.0) / grad, 0.0, 1.0);
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string num(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

struct TextureBlob {
    double x, y, weight;
};

std::vector<TextureBlob> texture_blobs(const PhantomSpec& spec) {
    std::vector<TextureBlob> out;
    const double area = std::numbers::pi * spec.nucleus.a * spec.nucleus.b;
    const auto count = static_cast<std::size_t>(std::lround(spec.texture_density * area / 1000.0));
    std::mt19937_64 rng(spec.texture_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    const auto& n = spec.nucleus;
    const double cs = std::cos(n.angle), sn = std::sin(n.angle);
    while (out.size() < count) {
        const double u = unit(rng), v = unit(rng);
        const double w = amp(rng);
        const double sign = unit(rng) < 0.0 ? -1.0 : 1.0;
        if (u * u + v * v > 1.0) continue;
        const double lx = u * n.a, ly = v * n.b;
        out.push_back({n.cx + cs * lx - sn * ly, n.cy + sn * lx + cs * ly, sign * w});
    }
    return out;
}

// Texture blobs bucketed on a grid of cell size = cutoff radius, so a
// sample only visits the 3x3 surrounding cells.
struct TextureGrid {
    double x0 = 0.0, y0 = 0.0, cell = 1.0;
    int nx = 0, ny = 0;
    std::vector<std::vector<TextureBlob>> cells;

    TextureGrid(const std::vector<TextureBlob>& blobs, double cutoff) : cell(cutoff) {
        if (blobs.empty()) return;
        double x1 = blobs[0].x, y1 = blobs[0].y;
        x0 = x1;
        y0 = y1;
        for (const auto& b : blobs) {
            x0 = std::min(x0, b.x);
            y0 = std::min(y0, b.y);
            x1 = std::max(x1, b.x);
            y1 = std::max(y1, b.y);
        }
        nx = static_cast<int>((x1 - x0) / cell) + 1;
        ny = static_cast<int>((y1 - y0) / cell) + 1;
        cells.resize(static_cast<std::size_t>(nx) * ny);
        for (const auto& b : blobs) {
            const int cx = static_cast<int>((b.x - x0) / cell), cy = static_cast<int>((b.y - y0) / cell);
            cells[static_cast<std::size_t>(cy) * nx + cx].push_back(b);
        }
    }

    [[nodiscard]] double value(double x, double y, double two_sigma2) const {
        if (cells.empty()) return 0.0;
        const int cx = static_cast<int>(std::floor((x - x0) / cell));
        const int cy = static_cast<int>(std::floor((y - y0) / cell));
        double acc = 0.0;
        for (int j = std::max(0, cy - 1); j <= std::min(ny - 1, cy + 1); ++j)
            for (int i = std::max(0, cx - 1); i <= std::min(nx - 1, cx + 1); ++i)
                for (const auto& t : cells[static_cast<std::size_t>(j) * nx + i]) {
                    const double dx = x - t.x, dy = y - t.y;
                    const double d2 = dx * dx + dy * dy;
                    if (d2 <= cell * cell) acc += t.weight * std::exp(-d2 / two_sigma2);
                }
        return acc;
    }
};

struct Scene {
    const PhantomSpec& spec;
    TextureGrid texture;
    double stripe_cy;
    double stripe_sigma;
    double nucleus_reach;

    explicit Scene(const PhantomSpec& s)
        : spec(s),
          texture(texture_blobs(s), 4.0 * s.texture_sigma),
          stripe_cy(s.stripe_center_y()),
          stripe_sigma(s.stripe_width / 3.0),
          nucleus_reach(std::max(s.nucleus.a, s.nucleus.b) + 2.0) {}

    // Split into the factor-independent part and the stripe part so that
    // value = base + (factor - 1) * stripe.
    void sample(double x, double y, double& base, double& stripe) const {
        base = 0.0;
        stripe = 0.0;
        const auto& n = spec.nucleus;
        if (std::abs(x - n.cx) <= nucleus_reach && std::abs(y - n.cy) <= nucleus_reach) {
            const double cov = n.coverage(x, y);
            if (cov > 0.0) {
                const double tex = texture.value(x, y, 2.0 * spec.texture_sigma * spec.texture_sigma);
                const double tex_factor = std::clamp(1.0 + spec.texture_amplitude * tex, 0.3, 2.0);
                const double body = cov * n.intensity * tex_factor;
                base += body;
                if (std::abs(y - stripe_cy) <= spec.stripe_length / 2.0) {
                    const double dx = x - spec.stripe_x;
                    stripe = cov * n.intensity * std::exp(-dx * dx / (2.0 * stripe_sigma * stripe_sigma));
                }
                for (const auto& b : spec.blobs) {
                    const double bx = x - b.x, by = y - b.y;
                    base += cov * b.amplitude * std::exp(-(bx * bx + by * by) / (2.0 * b.sigma * b.sigma));
                }
            }
        }
        for (const auto& e : spec.extra_nuclei) base += e.coverage(x, y) * e.intensity;
    }
};

void render(const Scene& scene, const RigidTransform& motion, Frame& base, Frame& stripe) {
    const int w = scene.spec.width, h = scene.spec.height;
    base = Frame(w, h);
    stripe = Frame(w, h);
    const Point2 c = rotation_center(w, h);
    const RigidTransform inv = motion.inverse();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Point2 u = inv.apply({static_cast<double>(x), static_cast<double>(y)}, c);
            double b = 0.0, s = 0.0;
            scene.sample(u.x, u.y, b, s);
            base.at(x, y) = static_cast<float>(b);
            stripe.at(x, y) = static_cast<float>(s);
        }
    }
}

BinaryMask ellipse_mask(const EllipseSpec& e, int w, int h, const RigidTransform& motion) {
    BinaryMask m(w, h);
    const Point2 c = rotation_center(w, h);
    const RigidTransform inv = motion.inverse();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Point2 u = inv.apply({static_cast<double>(x), static_cast<double>(y)}, c);
            m.set(x, y, e.rho(u.x, u.y) <= 1.0);
        }
    return m;
}

// seed_seq consumes 32-bit words.
std::uint32_t seed_lo(std::uint64_t s) { return static_cast<std::uint32_t>(s & 0xffffffffu); }
std::uint32_t seed_hi(std::uint64_t s) { return static_cast<std::uint32_t>(s >> 32); }

float quantize16(double v) {
    const double q = std::round(std::clamp(v, 0.0, 1.0) * 65535.0);
    return static_cast<float>(static_cast<std::uint16_t>(q)) / 65535.0f;
}

void validate(const PhantomSpec& s) {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::Config, "phantom spec: " + why); };
    if (s.width < 16 || s.height < 16) fail("image must be at least 16x16");
    if (s.frames < 1) fail("frames must be positive");
    if (s.nucleus.a <= 0.0 || s.nucleus.b <= 0.0) fail("nucleus semi-axes must be positive");
    if (s.nucleus.intensity <= 0.0) fail("nucleus intensity must be positive");
    if (s.stripe_width <= 0.0 || s.stripe_length <= 0.0) fail("stripe width and length must be positive");
    if (s.noise_sigma < 0.0 || s.snr < 0.0) fail("noise must be non-negative");
    if (s.texture_sigma <= 0.0) fail("texture sigma must be positive");
    if (!s.motion.empty() && static_cast<int>(s.motion.size()) != s.frames) fail("motion list must cover every frame");
    const double cy = s.stripe_center_y();
    for (double y : {cy - s.stripe_length / 2.0, cy, cy + s.stripe_length / 2.0})
        if (s.nucleus.rho(s.stripe_x, y) > 1.0) fail("stripe outside nucleus");
    if (s.truth_roi_width < 1 || s.truth_roi_height < 1) fail("truth ROI must be positive");
}

}  // namespace

std::vector<double> factor_schedule(const PhantomSpec& spec, const std::vector<FrameRole>& roles) {
    std::vector<double> f(roles.size(), 1.0);
    std::vector<std::size_t> post;
    for (std::size_t k = 0; k < roles.size(); ++k)
        if (roles[k] == FrameRole::PostIrradiation) post.push_back(k);
    const std::string& text = spec.factors;
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
        std::string rest = text.substr(colon + 1);
        std::replace(rest.begin(), rest.end(), ':', ',');
        args = kv_doubles(KeyValue{"factors", rest, 0});
    }
    const double p = static_cast<double>(post.size());
    if (kind == "ramp") {
        const double end = args.empty() ? 1.0 : args[0];
        for (std::size_t j = 0; j < post.size(); ++j) f[post[j]] = 1.0 + (end - 1.0) * (j + 1) / p;
    } else if (kind == "saturating") {
        if (args.size() != 2 || args[1] <= 0.0) throw Error(ErrorCode::Config, "factors: saturating:END:TAU");
        for (std::size_t j = 0; j < post.size(); ++j)
            f[post[j]] = 1.0 + (args[0] - 1.0) * (1.0 - std::exp(-static_cast<double>(j + 1) / args[1]));
    } else if (kind == "list") {
        if (args.size() != roles.size()) throw Error(ErrorCode::Config, "factors: list must have one value per frame");
        if (args[0] != 1.0) throw Error(ErrorCode::Config, "factors: schedule must start at 1.0");
        f = args;
    } else if (kind == "constant") {
    } else {
        throw Error(ErrorCode::Config, "factors: unknown schedule '" + kind + "'");
    }
    return f;
}

Frame render_scene(const PhantomSpec& spec, double factor, const RigidTransform& motion) {
    const Scene scene(spec);
    Frame base, stripe;
    render(scene, motion, base, stripe);
    for (std::size_t i = 0; i < base.pixels.size(); ++i)
        base.pixels[i] = static_cast<float>(base.pixels[i] + (factor - 1.0) * stripe.pixels[i]);
    return base;
}

Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    validate(spec);
    const LayoutSpec layout = parse_layout(spec.layout, spec.interval_s);
    const auto roles = assign_roles(layout, static_cast<std::size_t>(spec.frames));
    const Scene scene(spec);
    const int w = spec.width, h = spec.height;

    Phantom ph;
    auto& truth = ph.truth;
    truth.factors = factor_schedule(spec, roles);

    if (!spec.motion.empty()) {
        truth.transforms = spec.motion;
    } else {
        std::seed_seq motion_seed{seed_lo(seed), seed_hi(seed), 0x6d6f7469u};
        std::mt19937_64 rng(motion_seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int k = 0; k < spec.frames; ++k) {
            RigidTransform t{spec.drift_x * k, spec.drift_y * k, spec.drift_theta * k};
            if (k > 0) {
                t.dx += spec.jitter_px * gauss(rng);
                t.dy += spec.jitter_px * gauss(rng);
                t.theta += spec.jitter_theta * gauss(rng);
            }
            truth.transforms.push_back(t);
        }
    }

    const double sigma = spec.effective_sigma();
    ph.stack.source_id = spec.name;
    ph.stack.roles = roles;
    Frame base, stripe;
    for (int k = 0; k < spec.frames; ++k) {
        std::seed_seq frame_seed{seed_lo(seed), seed_hi(seed), static_cast<std::uint32_t>(k)};
        std::mt19937_64 rng(frame_seed);
        std::normal_distribution<double> noise(0.0, 1.0);
        Frame f(w, h);
        const bool dark = roles[k] == FrameRole::Dark;
        if (!dark) render(scene, truth.transforms[k], base, stripe);
        for (std::size_t i = 0; i < f.pixels.size(); ++i) {
            double v = spec.background;
            if (!dark) v += base.pixels[i] + (truth.factors[k] - 1.0) * stripe.pixels[i];
            if (sigma > 0.0) v += sigma * noise(rng);
            f.pixels[i] = quantize16(v);
        }
        ph.stack.frames.push_back(std::move(f));
        ph.stack.timestamps_s.push_back(k * spec.interval_s);
        truth.masks.push_back(ellipse_mask(spec.nucleus, w, h, truth.transforms[k]));
    }

    // Ratio over the reference frame: linear in the factor, so two sums suffice.
    truth.reference_mask = ellipse_mask(spec.nucleus, w, h, {});
    render(scene, {}, base, stripe);
    truth.stripe_x = static_cast<int>(std::lround(spec.stripe_x));
    truth.roi.width = spec.truth_roi_width;
    truth.roi.height = spec.truth_roi_height;
    truth.roi.x = std::clamp(truth.stripe_x - spec.truth_roi_width / 2, 0, std::max(0, w - spec.truth_roi_width));
    truth.roi.y = std::clamp(static_cast<int>(std::lround(spec.stripe_center_y() - spec.truth_roi_height / 2.0)), 0,
                             std::max(0, h - spec.truth_roi_height));
    double a_roi = 0.0, b_roi = 0.0, a_noi = 0.0, b_noi = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!truth.reference_mask.get(x, y)) continue;
            a_noi += base.at(x, y);
            b_noi += stripe.at(x, y);
            if (truth.roi.contains(x, y)) {
                a_roi += base.at(x, y);
                b_roi += stripe.at(x, y);
            }
        }
    for (int k = 0; k < spec.frames; ++k) {
        const double g = truth.factors[k] - 1.0;
        truth.true_ratio.push_back(k == 0 ? 1.0 : (1.0 + g * b_roi / a_roi) / (1.0 + g * b_noi / a_noi));
    }
    return ph;
}

std::string truth_csv(const Phantom& ph) {
    std::ostringstream out;
    out << "frame_index,role,time_s,factor,dx,dy,theta_rad,true_ratio\n";
    const auto& t = ph.truth;
    for (std::size_t k = 0; k < ph.stack.size(); ++k) {
        out << k << ',' << role_name(ph.stack.roles[k]) << ',' << format_number(ph.stack.timestamps_s[k]) << ','
            << format_number(t.factors[k]) << ',' << format_number(t.transforms[k].dx) << ','
            << format_number(t.transforms[k].dy) << ',' << format_number(t.transforms[k].theta) << ','
            << format_number(t.true_ratio[k]) << '\n';
    }
    return out.str();
}

fs::path write_phantom(const Phantom& ph, const PhantomSpec& spec, std::uint64_t seed, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string());
    const fs::path stack_path = dir / (spec.name + ".tif");
    save_stack_tiff(ph.stack, stack_path);
    write_file_atomic(dir / (spec.name + ".spec"), serialize_phantom_spec(spec) + "seed = " + std::to_string(seed) + "\n");
    write_file_atomic(dir / (spec.name + ".truth.csv"), truth_csv(ph));
    return stack_path;
}

PhantomSpec parse_phantom_spec(std::string_view text) {
    PhantomSpec s;
    bool have_cx = false, have_cy = false, have_sx = false;
    for (const auto& kv : parse_key_values(text)) {
        const auto& k = kv.key;
        auto d = [&] { return kv_double(kv); };
        auto i = [&] { return static_cast<int>(kv_int(kv)); };
        auto list = [&](std::size_t lo, std::size_t hi) {
            auto v = kv_doubles(kv);
            if (v.size() < lo || v.size() > hi)
                throw Error(ErrorCode::Config, "line " + std::to_string(kv.line) + ": " + k + ": wrong number of values");
            return v;
        };
        if (k == "name") s.name = kv.value;
        else if (k == "width") s.width = i();
        else if (k == "height") s.height = i();
        else if (k == "frames") s.frames = i();
        else if (k == "layout") s.layout = kv.value;
        else if (k == "interval_s") s.interval_s = d();
        else if (k == "nucleus.cx") s.nucleus.cx = d(), have_cx = true;
        else if (k == "nucleus.cy") s.nucleus.cy = d(), have_cy = true;
        else if (k == "nucleus.a") s.nucleus.a = d();
        else if (k == "nucleus.b") s.nucleus.b = d();
        else if (k == "nucleus.angle_deg") s.nucleus.angle = d() * kDeg;
        else if (k == "nucleus.intensity") s.nucleus.intensity = d();
        else if (k == "texture.amplitude") s.texture_amplitude = d();
        else if (k == "texture.density") s.texture_density = d();
        else if (k == "texture.sigma") s.texture_sigma = d();
        else if (k == "texture.seed") s.texture_seed = static_cast<std::uint64_t>(kv_int(kv));
        else if (k == "stripe.x") s.stripe_x = d(), have_sx = true;
        else if (k == "stripe.y") s.stripe_y = d();
        else if (k == "stripe.width") s.stripe_width = d();
        else if (k == "stripe.length") s.stripe_length = d();
        else if (k == "factors") s.factors = kv.value;
        else if (k == "motion.drift_x") s.drift_x = d();
        else if (k == "motion.drift_y") s.drift_y = d();
        else if (k == "motion.drift_theta_deg") s.drift_theta = d() * kDeg;
        else if (k == "motion.jitter_px") s.jitter_px = d();
        else if (k == "motion.jitter_deg") s.jitter_theta = d() * kDeg;
        else if (k == "motion.frame") {
            const auto v = list(3, 3);
            s.motion.push_back({v[0], v[1], v[2] * kDeg});
        } else if (k == "background") s.background = d();
        else if (k == "noise.sigma") s.noise_sigma = d();
        else if (k == "noise.snr") s.snr = d();
        else if (k == "blob") {
            const auto v = list(4, 4);
            s.blobs.push_back({v[0], v[1], v[2], v[3]});
        } else if (k == "nucleus2") {
            const auto v = list(5, 6);
            s.extra_nuclei.push_back({v[0], v[1], v[2], v[3], v.size() == 6 ? v[5] * kDeg : 0.0, v[4]});
        } else if (k == "truth.roi_width") s.truth_roi_width = i();
        else if (k == "truth.roi_height") s.truth_roi_height = i();
        else if (k == "seed") {
            // informational; written by write_phantom
        } else {
            throw Error(ErrorCode::Config, "line " + std::to_string(kv.line) + ": unknown key '" + k + "'");
        }
    }
    if (!have_cx) s.nucleus.cx = (s.width - 1) / 2.0;
    if (!have_cy) s.nucleus.cy = (s.height - 1) / 2.0;
    if (!have_sx) s.stripe_x = std::round(s.nucleus.cx);
    return s;
}

PhantomSpec read_phantom_spec(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_phantom_spec(ss.str());
}

std::string serialize_phantom_spec(const PhantomSpec& s) {
    std::ostringstream o;
    o << "name = " << s.name << "\n"
      << "width = " << s.width << "\n"
      << "height = " << s.height << "\n"
      << "frames = " << s.frames << "\n"
      << "layout = " << s.layout << "\n"
      << "interval_s = " << num(s.interval_s) << "\n"
      << "nucleus.cx = " << num(s.nucleus.cx) << "\n"
      << "nucleus.cy = " << num(s.nucleus.cy) << "\n"
      << "nucleus.a = " << num(s.nucleus.a) << "\n"
      << "nucleus.b = " << num(s.nucleus.b) << "\n"
      << "nucleus.angle_deg = " << num(s.nucleus.angle / kDeg) << "\n"
      << "nucleus.intensity = " << num(s.nucleus.intensity) << "\n"
      << "texture.amplitude = " << num(s.texture_amplitude) << "\n"
      << "texture.density = " << num(s.texture_density) << "\n"
      << "texture.sigma = " << num(s.texture_sigma) << "\n"
      << "texture.seed = " << s.texture_seed << "\n"
      << "stripe.x = " << num(s.stripe_x) << "\n";
    if (s.stripe_y >= 0.0) o << "stripe.y = " << num(s.stripe_y) << "\n";
    o << "stripe.width = " << num(s.stripe_width) << "\n"
      << "stripe.length = " << num(s.stripe_length) << "\n"
      << "factors = " << s.factors << "\n"
      << "motion.drift_x = " << num(s.drift_x) << "\n"
      << "motion.drift_y = " << num(s.drift_y) << "\n"
      << "motion.drift_theta_deg = " << num(s.drift_theta / kDeg) << "\n"
      << "motion.jitter_px = " << num(s.jitter_px) << "\n"
      << "motion.jitter_deg = " << num(s.jitter_theta / kDeg) << "\n";
    for (const auto& m : s.motion)
        o << "motion.frame = " << num(m.dx) << " " << num(m.dy) << " " << num(m.theta / kDeg) << "\n";
    o << "background = " << num(s.background) << "\n"
      << "noise.sigma = " << num(s.noise_sigma) << "\n"
      << "noise.snr = " << num(s.snr) << "\n";
    for (const auto& b : s.blobs)
        o << "blob = " << num(b.x) << " " << num(b.y) << " " << num(b.sigma) << " " << num(b.amplitude) << "\n";
    for (const auto& e : s.extra_nuclei)
        o << "nucleus2 = " << num(e.cx) << " " << num(e.cy) << " " << num(e.a) << " " << num(e.b) << " "
          << num(e.intensity) << " " << num(e.angle / kDeg) << "\n";
    o << "truth.roi_width = " << s.truth_roi_width << "\n"
      << "truth.roi_height = " << s.truth_roi_height << "\n";
    return o.str();
}

}  // namespace lesionquant
