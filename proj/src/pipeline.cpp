#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "error.hpp"
#include "image_core.hpp"
#include "keyvalue.hpp"

namespace lesionquant {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const char* status_name(StackStatus s) {
    switch (s) {
        case StackStatus::Ok: return "ok";
        case StackStatus::Flagged: return "flagged";
        case StackStatus::Rejected: return "rejected";
    }
    return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

StackResult reject(StackResult&& r, std::string reason) {
    r.status = StackStatus::Rejected;
    r.reason = std::move(reason);
    r.curve.reset();
    return std::move(r);
}

}  // namespace

StackResult analyze_stack(const ImageStack& stack, const AnalysisParams& params) {
    StackResult res;
    res.id = stack.source_id;
    const std::size_t n = stack.size();
    res.frames.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        res.frames[k].index = k;
        res.frames[k].role = stack.roles[k];
    }
    std::size_t pre = n;
    for (std::size_t k = 0; k < n; ++k)
        if (stack.roles[k] == FrameRole::PreIrradiation) {
            pre = k;
            break;
        }
    if (pre != 0) return reject(std::move(res), "stack does not start with a pre-irradiation frame");

    auto t0 = Clock::now();
    std::vector<std::optional<SegmentedFrame>> segs(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (stack.roles[k] == FrameRole::Dark) continue;
        try {
            segs[k] = segment_frame(stack.frames[k], params.segmentation);
        } catch (const Error& e) {
            res.frames[k].failure = e.what();
        }
    }
    res.times.segment = seconds_since(t0);
    if (!segs[pre]) return reject(std::move(res), res.frames[pre].failure);
    if (params.keep_qc) {
        res.reference_segmentation = segs[pre];
        res.reference_frame = stack.frames[pre];
    }

    t0 = Clock::now();
    std::vector<RegisteredFrame> reg;
    try {
        reg = register_stack(stack.frames, segs, stack.roles, params.registration);
    } catch (const Error& e) {
        return reject(std::move(res), e.what());
    }
    res.times.registration = seconds_since(t0);

    std::size_t post = 0, failed = 0;
    std::vector<Frame> reg_frames;
    std::vector<BinaryMask> reg_masks;
    for (std::size_t k = 0; k < n; ++k) {
        auto& fr = res.frames[k];
        if (stack.roles[k] == FrameRole::Dark) continue;
        fr.ok = reg[k].ok;
        fr.transform = reg[k].transform;
        fr.mse_initial = reg[k].mse_initial;
        fr.mse_final = reg[k].mse_final;
        if (!reg[k].ok && fr.failure.empty()) fr.failure = reg[k].failure;
        if (stack.roles[k] != FrameRole::PostIrradiation) continue;
        ++post;
        if (!fr.ok) {
            ++failed;
            continue;
        }
        reg_frames.push_back(reg[k].registered);
        reg_masks.push_back(reg[k].mask);
    }
    if (post > 0 && static_cast<double>(failed) > params.max_failed_fraction * static_cast<double>(post))
        return reject(std::move(res),
                      "too many failed frames (" + std::to_string(failed) + " of " + std::to_string(post) + ")");
    if (failed > 0) res.warnings.push_back(std::to_string(failed) + " post-irradiation frame(s) failed and were excluded");

    t0 = Clock::now();
    try {
        res.detection = detect_roi(reg_frames, reg_masks, params.roi);
    } catch (const Error& e) {
        return reject(std::move(res), e.what());
    }
    res.times.roi = seconds_since(t0);
    reg_frames.clear();

    t0 = Clock::now();
    std::vector<FrameSample> samples(n);
    for (std::size_t k = 0; k < n; ++k) {
        auto& s = samples[k];
        s.frame_index = k;
        s.role = stack.roles[k];
        s.time_s = k < stack.timestamps_s.size() ? stack.timestamps_s[k] : 0.0;
        if (!res.frames[k].ok) continue;
        const Background bg = estimate_background(stack.frames[k], segs[k]->foreground, params.background_margin);
        if (bg.empty) res.warnings.push_back("frame " + std::to_string(k) + ": empty background region, using 0");
        res.frames[k].background = bg.value;
        s.value = measure_frame(reg[k].registered, res.detection->roi, reg[k].mask, bg.value);
        if (!s.value) res.frames[k].failure = "ROI does not intersect the nucleus";
    }
    try {
        res.curve = compute_curve(samples);
    } catch (const Error& e) {
        return reject(std::move(res), e.what());
    }
    res.times.measure = seconds_since(t0);

    res.status = StackStatus::Ok;
    if (res.detection->low_confidence) {
        res.status = StackStatus::Flagged;
        res.reason = "low ROI confidence (margin " + format_number(res.detection->margin) + ")";
    }
    return res;
}

// ---------------------------------------------------------------------------

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir) {
    RunConfig cfg;
    cfg.output_dir = base_dir / "out";
    auto resolve = [&](const std::string& p) {
        const fs::path path(p);
        return (path.is_absolute() ? path : base_dir / path).lexically_normal();
    };
    for (const auto& kv : parse_key_values(text)) {
        const auto& k = kv.key;
        if (k == "input") {
            cfg.inputs.push_back({"", resolve(kv.value).string()});
        } else if (k.rfind("input.", 0) == 0) {
            const std::string cond = k.substr(6);
            if (cond.empty() || cond.find_first_of("/\\ ") != std::string::npos)
                throw Error(ErrorCode::Config, "line " + std::to_string(kv.line) + ": invalid condition label");
            cfg.inputs.push_back({cond, resolve(kv.value).string()});
        } else if (k == "roi_width") {
            cfg.roi_width = static_cast<int>(kv_int(kv));
        } else if (k == "roi_height") {
            cfg.roi_height = static_cast<int>(kv_int(kv));
        } else if (k == "frame_interval_s") {
            cfg.frame_interval_s = kv_double(kv);
        } else if (k == "layout") {
            cfg.layout = kv.value;
        } else if (k == "qc") {
            cfg.qc = kv_bool(kv);
        } else if (k == "output_dir") {
            cfg.output_dir = resolve(kv.value);
        } else if (k == "jobs") {
            cfg.jobs = static_cast<int>(kv_int(kv));
        } else {
            throw Error(ErrorCode::Config, "line " + std::to_string(kv.line) + ": unknown key '" + k + "'");
        }
    }
    return cfg;
}

RunConfig read_run_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void validate_run_config(const RunConfig& c) {
    if (c.inputs.empty()) throw Error(ErrorCode::Config, "no input configured");
    if (c.roi_width < 3 || c.roi_height < 3) throw Error(ErrorCode::Config, "ROI width and height must be >= 3");
    if (c.jobs < 1) throw Error(ErrorCode::Config, "jobs must be >= 1");
    if (!(c.frame_interval_s > 0.0)) throw Error(ErrorCode::Config, "frame_interval_s must be positive");
    try {
        parse_layout(c.layout, c.frame_interval_s);
    } catch (const Error& e) {
        throw Error(ErrorCode::Config, e.what());
    }
}

namespace {

bool wildcard_match(std::string_view pat, std::string_view s) {
    std::size_t p = 0, i = 0, star = std::string_view::npos, mark = 0;
    while (i < s.size()) {
        if (p < pat.size() && (pat[p] == '?' || pat[p] == s[i])) {
            ++p;
            ++i;
        } else if (p < pat.size() && pat[p] == '*') {
            star = p++;
            mark = i;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            i = ++mark;
        } else {
            return false;
        }
    }
    while (p < pat.size() && pat[p] == '*') ++p;
    return p == pat.size();
}

}  // namespace

std::vector<fs::path> expand_pattern(const std::string& pattern) {
    const fs::path p(pattern);
    const std::string name = p.filename().string();
    const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
    if (dir.string().find_first_of("*?") != std::string::npos)
        throw Error(ErrorCode::Config, "wildcards are only supported in the file name: " + pattern);
    std::vector<fs::path> out;
    if (name.find_first_of("*?") == std::string::npos) {
        out.push_back(p);
        return out;
    }
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (!entry.is_regular_file()) continue;
        if (wildcard_match(name, entry.path().filename().string())) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t RunReport::count(StackStatus s) const {
    return static_cast<std::size_t>(
        std::count_if(stacks.begin(), stacks.end(), [s](const StackReport& r) { return r.status == s; }));
}

int RunReport::exit_code() const { return count(StackStatus::Ok) + count(StackStatus::Flagged) > 0 ? 0 : 1; }

std::string diagnostics_json(const StackResult& r, const AnalysisParams& params) {
    ojson j;
    j["id"] = r.id;
    j["condition"] = r.condition;
    j["source"] = r.source.filename().string();
    j["status"] = status_name(r.status);
    j["reason"] = r.reason;
    j["warnings"] = r.warnings;
    ojson frames = ojson::array();
    for (const auto& f : r.frames) {
        ojson fj;
        fj["index"] = f.index;
        fj["role"] = role_name(f.role);
        fj["ok"] = f.ok;
        if (!f.failure.empty()) fj["failure"] = f.failure;
        if (f.ok) {
            fj["transform"] = {{"dx", f.transform.dx}, {"dy", f.transform.dy}, {"theta_rad", f.transform.theta}};
            fj["mse_initial"] = f.mse_initial;
            fj["mse_final"] = f.mse_final;
            fj["background"] = f.background;
        }
        frames.push_back(std::move(fj));
    }
    j["frames"] = std::move(frames);
    ojson roi;
    roi["configured_width"] = params.roi.width;
    roi["configured_height"] = params.roi.height;
    if (r.detection) {
        const auto& d = *r.detection;
        roi["x"] = d.roi.x;
        roi["y"] = d.roi.y;
        roi["width"] = d.roi.width;
        roi["height"] = d.roi.height;
        roi["feature_width"] = d.feature_width;
        roi["noi_centroid_x"] = d.noi_centroid_x;
        roi["chosen_x"] = d.peak().x;
        roi["confidence_margin"] = d.margin;
        roi["low_confidence"] = d.low_confidence;
        ojson cands = ojson::array();
        for (const auto& c : d.candidates) {
            cands.push_back({{"x", c.x},
                             {"s_height", c.s_height},
                             {"s_haar", c.s_haar},
                             {"s_center", c.s_center},
                             {"n_height", c.n_height},
                             {"n_haar", c.n_haar},
                             {"n_center", c.n_center},
                             {"s_total", c.s_total}});
        }
        roi["candidates"] = std::move(cands);
    }
    j["roi"] = std::move(roi);
    return j.dump(2) + "\n";
}

std::string transforms_csv(const StackResult& r) {
    std::string out = "frame_index,dx,dy,theta_rad\n";
    for (const auto& f : r.frames) {
        if (!f.ok) continue;
        out += std::to_string(f.index) + "," + format_number(f.transform.dx) + "," + format_number(f.transform.dy) +
               "," + format_number(f.transform.theta) + "\n";
    }
    return out;
}

std::string report_json(const RunReport& rep) {
    ojson j;
    j["stacks_total"] = rep.stacks.size();
    j["ok"] = rep.count(StackStatus::Ok);
    j["flagged"] = rep.count(StackStatus::Flagged);
    j["rejected"] = rep.count(StackStatus::Rejected);
    j["exit_code"] = rep.exit_code();
    j["wall_seconds"] = rep.wall_seconds;
    j["conditions"] = rep.conditions;
    ojson stacks = ojson::array();
    for (const auto& s : rep.stacks) {
        stacks.push_back({{"id", s.id},
                          {"condition", s.condition},
                          {"source", s.source},
                          {"status", status_name(s.status)},
                          {"reason", s.reason},
                          {"warnings", s.warnings},
                          {"seconds",
                           {{"load", s.times.load},
                            {"segment", s.times.segment},
                            {"register", s.times.registration},
                            {"roi", s.times.roi},
                            {"measure", s.times.measure}}}});
    }
    j["stacks"] = std::move(stacks);
    return j.dump(2) + "\n";
}

namespace {

struct Job {
    std::string id;
    std::string condition;
    fs::path path;
};

void write_qc(const StackResult& r, const fs::path& dir) {
    const std::string base = (dir / r.id).string();
    if (r.detection) write_qc_overlay(base + ".qc.png", r.detection->avg_t, r.detection->union_mask, r.detection->roi);
    write_file_atomic(base + ".transforms.csv", transforms_csv(r));
    if (!r.reference_segmentation) return;
    const auto& s = *r.reference_segmentation;
    write_gray_png(base + ".seg_a.png", r.reference_frame);
    write_gray_png(base + ".seg_b.png", s.smoothed);
    write_mask_png(base + ".seg_c.png", s.coarse_noi);
    write_gray_png(base + ".seg_d.png", s.polar_smoothed);
    write_mask_png(base + ".seg_e.png", s.polar_binary);
    write_qc_overlay(base + ".seg_f.png", r.reference_frame, s.mask, std::nullopt);
}

}  // namespace

RunReport run_batch(const RunConfig& config, const std::function<void(const StackReport&)>& progress) {
    validate_run_config(config);
    const auto t_start = Clock::now();
    const LayoutSpec layout = parse_layout(config.layout, config.frame_interval_s);

    std::vector<Job> jobs;
    std::set<std::string> ids;
    RunReport report;
    for (const auto& group : config.inputs) {
        const std::string cond = group.condition.empty() ? "default" : group.condition;
        if (std::find(report.conditions.begin(), report.conditions.end(), cond) == report.conditions.end())
            report.conditions.push_back(cond);
        for (const auto& p : expand_pattern(group.pattern)) {
            std::string id = p.stem().string();
            for (int suffix = 2; ids.count(id); ++suffix) id = p.stem().string() + "-" + std::to_string(suffix);
            ids.insert(id);
            jobs.push_back({id, cond, p});
        }
    }
    if (jobs.empty()) throw Error(ErrorCode::Config, "no input stacks matched");

    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) throw Error(ErrorCode::Config, "cannot create output directory " + config.output_dir.string());

    AnalysisParams params;
    params.roi.width = config.roi_width;
    params.roi.height = config.roi_height;
    params.keep_qc = config.qc;

    std::vector<std::optional<StackResult>> slots(jobs.size());
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            StackResult r;
            const auto t0 = Clock::now();
            try {
                ImageStack stack = load_stack(jobs[i].path, layout);
                stack.source_id = jobs[i].id;
                const double load_s = seconds_since(t0);
                r = analyze_stack(stack, params);
                r.times.load = load_s;
            } catch (const std::exception& e) {
                r = StackResult{};
                r.status = StackStatus::Rejected;
                r.reason = e.what();
                r.times.load = seconds_since(t0);
            }
            r.id = jobs[i].id;
            r.condition = jobs[i].condition;
            r.source = jobs[i].path;
            {
                std::lock_guard lock(mu);
                slots[i] = std::move(r);
            }
            cv.notify_all();
        }
    };
    const int n_workers = std::max(1, std::min<int>(config.jobs, static_cast<int>(jobs.size())));
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);

    std::map<std::string, std::vector<IntensityCurve>> curves;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        StackResult r;
        {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return slots[i].has_value(); });
            r = std::move(*slots[i]);
            slots[i].reset();
        }
        const fs::path base = config.output_dir / r.id;
        try {
            if (r.curve) write_curve_csv(*r.curve, base.string() + ".curve.csv");
            write_file_atomic(base.string() + ".diagnostics.json", diagnostics_json(r, params));
            if (config.qc) write_qc(r, config.output_dir);
        } catch (const std::exception& e) {
            r.warnings.push_back(std::string("output: ") + e.what());
        }
        if (r.curve && r.status != StackStatus::Rejected) curves[r.condition].push_back(*r.curve);
        StackReport sr{r.id, r.condition, r.source.string(), r.status, r.reason, r.warnings, r.times};
        if (progress) progress(sr);
        report.stacks.push_back(std::move(sr));
    }
    for (auto& t : pool) t.join();

    for (const auto& cond : report.conditions) {
        auto it = curves.find(cond);
        if (it == curves.end() || it->second.empty()) continue;
        write_aggregate_csv(aggregate(it->second), config.output_dir / ("aggregate_" + cond + ".csv"));
    }
    report.wall_seconds = seconds_since(t_start);
    write_file_atomic(config.output_dir / "report.json", report_json(report));
    return report;
}

}  // namespace lesionquant
