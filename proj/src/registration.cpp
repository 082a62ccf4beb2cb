#include "registration.hpp"

#include <array>
#include <cmath>

#include "error.hpp"
#include "image_core.hpp"

namespace lesionquant {

Point2 RigidTransform::apply(Point2 p, Point2 c) const {
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double x = p.x - c.x, y = p.y - c.y;
    return {cs * x - sn * y + c.x + dx, sn * x + cs * y + c.y + dy};
}

RigidTransform RigidTransform::inverse() const {
    // d' = -R(-theta) d
    const double cs = std::cos(theta), sn = std::sin(theta);
    return {-(cs * dx + sn * dy), -(-sn * dx + cs * dy), -theta};
}

RigidTransform RigidTransform::then(const RigidTransform& outer) const {
    const double cs = std::cos(outer.theta), sn = std::sin(outer.theta);
    return {cs * dx - sn * dy + outer.dx, sn * dx + cs * dy + outer.dy, theta + outer.theta};
}

Point2 rotation_center(int width, int height) { return {(width - 1) / 2.0, (height - 1) / 2.0}; }

Frame warp(const Frame& img, const RigidTransform& t) {
    const Point2 c = rotation_center(img.width, img.height);
    const RigidTransform inv = t.inverse();
    const double cs = std::cos(inv.theta), sn = std::sin(inv.theta);
    Frame out(img.width, img.height);
    out.bit_depth_source = img.bit_depth_source;
    for (int y = 0; y < img.height; ++y) {
        const double ry = y - c.y;
        for (int x = 0; x < img.width; ++x) {
            const double rx = x - c.x;
            out.at(x, y) = bilinear_sample(img, cs * rx - sn * ry + c.x + inv.dx, sn * rx + cs * ry + c.y + inv.dy);
        }
    }
    return out;
}

BinaryMask warp_nearest(const BinaryMask& mask, const RigidTransform& t) {
    const Point2 c = rotation_center(mask.width, mask.height);
    const RigidTransform inv = t.inverse();
    BinaryMask out(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const Point2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)}, c);
            const auto sx = static_cast<long>(std::lround(s.x));
            const auto sy = static_cast<long>(std::lround(s.y));
            if (sx >= 0 && sy >= 0 && sx < mask.width && sy < mask.height)
                out.set(x, y, mask.get(static_cast<int>(sx), static_cast<int>(sy)));
        }
    }
    return out;
}

namespace {

// Bilinear sample that refuses to blend with zero (masked-out) neighbours,
// so the objective never sees the artificial edge created by the mask.
bool sample_support(const Frame& img, double x, double y, float& out) {
    const double fx0 = std::floor(x), fy0 = std::floor(y);
    const int x0 = static_cast<int>(fx0), y0 = static_cast<int>(fy0);
    const double ax = x - fx0, ay = y - fy0;
    double acc = 0.0;
    for (int j = 0; j < 2; ++j) {
        const double wy = j ? ay : 1.0 - ay;
        if (wy == 0.0) continue;
        for (int i = 0; i < 2; ++i) {
            const double wx = i ? ax : 1.0 - ax;
            if (wx == 0.0) continue;
            const int xi = x0 + i, yi = y0 + j;
            if (!img.contains(xi, yi)) return false;
            const float v = img.at(xi, yi);
            if (v == 0.0f) return false;
            acc += wx * wy * v;
        }
    }
    out = static_cast<float>(acc);
    return true;
}

double support_mse(const Frame& reference, const Frame& moving, const RigidTransform& t, std::size_t* overlap) {
    const Point2 c = rotation_center(reference.width, reference.height);
    const RigidTransform inv = t.inverse();
    const double cs = std::cos(inv.theta), sn = std::sin(inv.theta);
    double sse = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < reference.height; ++y) {
        for (int x = 0; x < reference.width; ++x) {
            const float r = reference.at(x, y);
            if (r == 0.0f) continue;
            const double rx = x - c.x, ry = y - c.y;
            float m = 0.0f;
            if (!sample_support(moving, cs * rx - sn * ry + c.x + inv.dx, sn * rx + cs * ry + c.y + inv.dy, m)) continue;
            const double d = static_cast<double>(m) - r;
            sse += d * d;
            ++n;
        }
    }
    if (overlap) *overlap = n;
    return n ? sse / static_cast<double>(n) : std::numeric_limits<double>::infinity();
}

// Zeroes every nonzero pixel that touches a zero or the border (8-neighbourhood).
// Partial-coverage pixels on a mask edge depend on where each frame's
// segmentation cut, so they are kept out of the objective.
Frame erode_support_once(const Frame& f) {
    Frame out = f;
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
            if (f.at(x, y) == 0.0f) continue;
            bool edge = false;
            for (int dy = -1; dy <= 1 && !edge; ++dy)
                for (int dx = -1; dx <= 1 && !edge; ++dx)
                    edge = !f.contains(x + dx, y + dy) || f.at(x + dx, y + dy) == 0.0f;
            if (edge) out.at(x, y) = 0.0f;
        }
    return out;
}

// Gaussian smoothing restricted to the nonzero support (normalized
// convolution), so masked-out zeros do not bleed into the nucleus.
Frame erode_support(const Frame& f, int radius = 1) {
    Frame out = f;
    for (int i = 0; i < radius; ++i) out = erode_support_once(out);
    return out;
}

// Pixels within the smoothing footprint of the mask edge still depend on the
// edge position, so the support is eroded past the kernel's bulk.
int prepare_erosion(double sigma) { return 1 + static_cast<int>(std::ceil(2.0 * sigma)); }

Frame smooth_support(const Frame& f, double sigma) {
    if (sigma <= 0.0) return f;
    Frame support(f.width, f.height);
    for (std::size_t i = 0; i < f.pixels.size(); ++i) support.pixels[i] = f.pixels[i] != 0.0f ? 1.0f : 0.0f;
    const Frame num = gaussian_blur(f, sigma);
    const Frame den = gaussian_blur(support, sigma);
    Frame out(f.width, f.height);
    for (std::size_t i = 0; i < f.pixels.size(); ++i)
        if (f.pixels[i] != 0.0f && den.pixels[i] > 0.0f) out.pixels[i] = num.pixels[i] / den.pixels[i];
    return out;
}

Frame downsample2(const Frame& f) {
    Frame out(std::max(1, f.width / 2), std::max(1, f.height / 2));
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const int x0 = std::min(2 * x, f.width - 1), x1 = std::min(2 * x + 1, f.width - 1);
            const int y0 = std::min(2 * y, f.height - 1), y1 = std::min(2 * y + 1, f.height - 1);
            out.at(x, y) = 0.25f * (f.at(x0, y0) + f.at(x1, y0) + f.at(x0, y1) + f.at(x1, y1));
        }
    }
    return out;
}

struct Level {
    int factor = 1;
    Frame reference;
    Frame moving;
    Frame grad_x;
    Frame grad_y;
    Point2 center;
    struct Sample {
        float x, y, value;
    };
    std::vector<Sample> ref_samples;  // nonzero reference pixels
};

void build_gradients(Level& lv) {
    const Frame& m = lv.moving;
    lv.grad_x = Frame(m.width, m.height);
    lv.grad_y = Frame(m.width, m.height);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (m.at(x, y) == 0.0f) continue;
            // Central differences, one-sided next to the mask or the border.
            auto usable = [&](int xi, int yi) { return m.contains(xi, yi) && m.at(xi, yi) != 0.0f; };
            int xl = usable(x - 1, y) ? x - 1 : x, xr = usable(x + 1, y) ? x + 1 : x;
            int yu = usable(x, y - 1) ? y - 1 : y, yd = usable(x, y + 1) ? y + 1 : y;
            if (xr > xl) lv.grad_x.at(x, y) = (m.at(xr, y) - m.at(xl, y)) / static_cast<float>(xr - xl);
            if (yd > yu) lv.grad_y.at(x, y) = (m.at(x, yd) - m.at(x, yu)) / static_cast<float>(yd - yu);
        }
    }
}

// Sampling map u = R(phi)(p - c) + c + e, parameters (ex, ey, phi) in level pixels.
using Params = std::array<double, 3>;

struct Eval {
    double mse = std::numeric_limits<double>::infinity();
    std::size_t overlap = 0;
    std::array<double, 6> hessian{};  // upper triangle of J^T J
    std::array<double, 3> gradient{};
};

Eval evaluate(const Level& lv, const Params& q, bool with_derivatives) {
    Eval ev;
    const double cs = std::cos(q[2]), sn = std::sin(q[2]);
    double sse = 0.0;
    for (const auto& s : lv.ref_samples) {
        const double X = s.x - lv.center.x, Y = s.y - lv.center.y;
        const double ux = cs * X - sn * Y + lv.center.x + q[0];
        const double uy = sn * X + cs * Y + lv.center.y + q[1];
        float m = 0.0f;
        if (!sample_support(lv.moving, ux, uy, m)) continue;
        const double r = static_cast<double>(m) - s.value;
        sse += r * r;
        ++ev.overlap;
        if (!with_derivatives) continue;
        const double gx = bilinear_sample(lv.grad_x, ux, uy);
        const double gy = bilinear_sample(lv.grad_y, ux, uy);
        const double j2 = gx * (-sn * X - cs * Y) + gy * (cs * X - sn * Y);
        const double j[3] = {gx, gy, j2};
        ev.hessian[0] += j[0] * j[0];
        ev.hessian[1] += j[0] * j[1];
        ev.hessian[2] += j[0] * j[2];
        ev.hessian[3] += j[1] * j[1];
        ev.hessian[4] += j[1] * j[2];
        ev.hessian[5] += j[2] * j[2];
        for (int k = 0; k < 3; ++k) ev.gradient[k] += j[k] * r;
    }
    if (ev.overlap) ev.mse = sse / static_cast<double>(ev.overlap);
    return ev;
}

bool solve3(std::array<double, 9> a, std::array<double, 3> b, std::array<double, 3>& x) {
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r * 3 + col]) > std::abs(a[piv * 3 + col])) piv = r;
        if (std::abs(a[piv * 3 + col]) < 1e-300) return false;
        if (piv != col) {
            for (int k = 0; k < 3; ++k) std::swap(a[col * 3 + k], a[piv * 3 + k]);
            std::swap(b[col], b[piv]);
        }
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r * 3 + col] / a[col * 3 + col];
            for (int k = col; k < 3; ++k) a[r * 3 + k] -= f * a[col * 3 + k];
            b[r] -= f * b[col];
        }
    }
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < 3; ++k) s -= a[r * 3 + k] * x[k];
        x[r] = s / a[r * 3 + r];
    }
    return true;
}

// Returns the number of iterations spent.
int optimize_level(const Level& lv, Params& q, const RegistrationParams& params) {
    Eval cur = evaluate(lv, q, true);
    if (cur.overlap == 0) return 0;
    double lambda = 1e-3;
    int it = 0;
    while (it < params.max_iterations) {
        ++it;
        const auto& h = cur.hessian;
        const std::array<double, 9> base = {h[0], h[1], h[2], h[1], h[3], h[4], h[2], h[4], h[5]};
        std::array<double, 9> a = base;
        for (int k = 0; k < 3; ++k) a[k * 4] = base[k * 4] * (1.0 + lambda);
        std::array<double, 3> step{};
        const std::array<double, 3> rhs = {-cur.gradient[0], -cur.gradient[1], -cur.gradient[2]};
        if (!solve3(a, rhs, step)) break;
        const Params cand = {q[0] + step[0], q[1] + step[1], q[2] + step[2]};
        Eval next = evaluate(lv, cand, true);
        const bool enough_overlap = next.overlap * 10 >= cur.overlap * 5;
        if (next.overlap > 0 && enough_overlap && next.mse < cur.mse) {
            q = cand;
            cur = next;
            lambda = std::max(lambda * 0.3, 1e-9);
            const bool small = std::abs(step[0]) * lv.factor < params.tol_translation &&
                               std::abs(step[1]) * lv.factor < params.tol_translation &&
                               std::abs(step[2]) < params.tol_rotation;
            if (small) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e8) break;
        }
    }
    return it;
}

}  // namespace

double registration_mse(const Frame& reference, const Frame& moving, const RigidTransform& t,
                        const RegistrationParams& params, std::size_t* overlap) {
    const double sigma = params.presmooth_sigma;
    const int e = prepare_erosion(sigma);
    return support_mse(erode_support(smooth_support(reference, sigma), e), erode_support(smooth_support(moving, sigma), e),
                       t, overlap);
}

RegistrationResult register_pair(const Frame& reference, const Frame& moving, const RigidTransform& init,
                                 const RegistrationParams& params) {
    if (reference.width != moving.width || reference.height != moving.height)
        throw Error(ErrorCode::InvalidArgument, "register_pair: image sizes differ");
    std::size_t ref_foreground = 0;
    for (float v : reference.pixels) ref_foreground += v != 0.0f;
    std::size_t mov_foreground = 0;
    for (float v : moving.pixels) mov_foreground += v != 0.0f;
    if (ref_foreground == 0 || mov_foreground == 0)
        throw Error(ErrorCode::InvalidArgument, "register_pair: image without foreground");

    RegistrationResult res;

    const Point2 c_full = rotation_center(reference.width, reference.height);
    // Sampling-map parameters at full resolution.
    const RigidTransform s0 = init.inverse();
    Params q_full = {s0.dx, s0.dy, s0.theta};

    // Pyramid, finest first.
    std::vector<Level> levels;
    {
        const int e = prepare_erosion(params.presmooth_sigma);
        Frame ref = erode_support(smooth_support(reference, params.presmooth_sigma), e);
        Frame mov = erode_support(smooth_support(moving, params.presmooth_sigma), e);
        res.mse_initial = support_mse(ref, mov, init, &res.overlap);
        int factor = 1;
        int max_factor = 1;
        for (int f : params.pyramid) max_factor = std::max(max_factor, f);
        while (true) {
            Level lv;
            lv.factor = factor;
            lv.reference = ref;
            lv.moving = mov;
            levels.push_back(std::move(lv));
            if (factor * 2 > max_factor || ref.width < 8 || ref.height < 8) break;
            ref = erode_support(downsample2(ref));
            mov = erode_support(downsample2(mov));
            factor *= 2;
        }
    }
    for (int f : params.pyramid) {
        Level* lv = nullptr;
        for (auto& l : levels)
            if (l.factor == f) lv = &l;
        if (!lv) continue;
        if (lv->grad_x.empty()) {
            build_gradients(*lv);
            lv->center = {(c_full.x + 0.5) / f - 0.5, (c_full.y + 0.5) / f - 0.5};
            for (int y = 0; y < lv->reference.height; ++y)
                for (int x = 0; x < lv->reference.width; ++x)
                    if (const float v = lv->reference.at(x, y); v != 0.0f)
                        lv->ref_samples.push_back({static_cast<float>(x), static_cast<float>(y), v});
        }
        Params q = {q_full[0] / f, q_full[1] / f, q_full[2]};
        res.iterations += optimize_level(*lv, q, params);
        q_full = {q[0] * f, q[1] * f, q[2]};
    }

    const RigidTransform found = RigidTransform{q_full[0], q_full[1], q_full[2]}.inverse();
    const Level& finest = levels.front();
    std::size_t overlap = 0;
    double mse = support_mse(finest.reference, finest.moving, found, &overlap);
    RigidTransform best = found;
    if (mse > res.mse_initial && finest.factor == 1 && !finest.grad_x.empty()) {
        // The coarse levels led into a worse basin; refine from the seed instead.
        Params q = {s0.dx, s0.dy, s0.theta};
        res.iterations += optimize_level(finest, q, params);
        const RigidTransform retry = RigidTransform{q[0], q[1], q[2]}.inverse();
        std::size_t retry_overlap = 0;
        const double retry_mse = support_mse(finest.reference, finest.moving, retry, &retry_overlap);
        if (retry_mse < mse) {
            best = retry;
            mse = retry_mse;
            overlap = retry_overlap;
        }
    }
    res.transform = init;
    res.mse_final = res.mse_initial;
    if (mse <= res.mse_initial) {
        res.transform = best;
        res.mse_final = mse;
        res.overlap = overlap;
    }
    if (static_cast<double>(res.overlap) < params.min_overlap_fraction * static_cast<double>(ref_foreground))
        throw Error(ErrorCode::RegistrationDiverged, "registration diverged");
    return res;
}

std::vector<RegisteredFrame> register_stack(std::span<const Frame> originals,
                                            std::span<const std::optional<SegmentedFrame>> segmented,
                                            std::span<const FrameRole> roles, const RegistrationParams& params) {
    if (originals.size() != segmented.size() || originals.size() != roles.size())
        throw Error(ErrorCode::InvalidArgument, "register_stack: input lengths differ");
    std::vector<RegisteredFrame> out(originals.size());
    std::size_t ref_index = originals.size();
    for (std::size_t i = 0; i < roles.size(); ++i)
        if (roles[i] == FrameRole::PreIrradiation) ref_index = i;
    if (ref_index == originals.size() || !segmented[ref_index])
        throw Error(ErrorCode::StackRejected, "pre-irradiation frame is not segmented");

    const Frame& reference = segmented[ref_index]->masked;
    out[ref_index].ok = true;
    out[ref_index].registered = segmented[ref_index]->masked;
    out[ref_index].mask = segmented[ref_index]->mask;

    RigidTransform chain;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        if (roles[i] != FrameRole::PostIrradiation) continue;
        auto& rf = out[i];
        if (!segmented[i]) {
            rf.failure = "segmentation failed";
            continue;
        }
        try {
            const auto res = register_pair(reference, segmented[i]->masked, chain, params);
            rf.transform = res.transform;
            rf.mse_initial = res.mse_initial;
            rf.mse_final = res.mse_final;
            rf.mask = warp_nearest(segmented[i]->mask, res.transform);
            if (rf.mask.count() == 0) {
                rf.failure = "empty mask after registration";
                continue;
            }
            rf.registered = apply_mask(warp(originals[i], res.transform), rf.mask);
            rf.ok = true;
            chain = res.transform;
        } catch (const Error& e) {
            rf.failure = e.what();
        }
    }
    return out;
}

}  // namespace lesionquant
