#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "videolstm/rng.hpp"
#include "videolstm/tensor_ops.hpp"

// Synthetic labeled video: a single glyph whose motion pattern defines the
// class, rendered over static clutter, with the analytic displacement field
// as ground-truth optical flow and tight per-frame bounding boxes.
namespace vlsm {

// Pixel box, inclusive-exclusive. Coordinates are continuous so smoothed
// boxes keep sub-pixel centers.
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x0 + x1); }
    double center_y() const { return 0.5 * (y0 + y1); }
    bool valid() const { return x0 < x1 && y0 < y1; }
};

enum class MotionProgram {
    kHorizontalBounce = 0,
    kVerticalBounce = 1,
    kDiagonal = 2,
    kCircular = 3,
    kExpanding = 4,
    kStaticFlicker = 5,
};
inline constexpr int kNumMotionPrograms = 6;

inline const char* motion_program_name(int p) {
    static const char* names[kNumMotionPrograms] = {"horizontal_bounce", "vertical_bounce",
                                                    "diagonal",          "circular",
                                                    "expanding",         "static_flicker"};
    return names[p];
}

enum class ShapeKind { kSquare = 0, kDisc = 1, kDiamond = 2 };

// The motion program determines the class label one-to-one; everything else
// (shape, size, intensity, start pose) is appearance and must not correlate
// with the class.
struct GlyphSpec {
    ShapeKind shape = ShapeKind::kDisc;
    double size = 5.0;       // nominal radius, px
    double intensity = 0.9;  // glyph brightness in [0,1]
    MotionProgram program = MotionProgram::kHorizontalBounce;
    double speed = 2.0;   // px/frame
    double clutter = 0.3;  // background clutter level in [0,1]
    double noise_sigma = 0.02;
};

struct VideoClip {
    int height = 0, width = 0;
    std::vector<Tensor> frames;  // T × H×W×1, values in [0,1]
    std::vector<Tensor> flow;    // T × H×W×2 px/frame: ch0 = dx, ch1 = dy; flow[0] = 0
    std::vector<Box> gt_boxes;   // per frame, tight around the glyph
    int label = -1;
};

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

namespace detail {

// Reflective fold of an unbounded coordinate into [lo, hi].
inline double fold(double p, double lo, double hi) {
    if (hi <= lo) return lo;
    const double span = hi - lo;
    double q = std::fmod(p - lo, 2.0 * span);
    if (q < 0) q += 2.0 * span;
    return lo + (q <= span ? q : 2.0 * span - q);
}

// Pose of the glyph at frame t, fully analytic in t.
struct GlyphPose {
    double cx, cy;   // center, continuous pixel coordinates
    double size;     // current radius
    double bright;   // current intensity
};

struct TrajectoryParams {
    double cx0, cy0;        // start center (bounce programs) / orbit center (circular)
    double sx, sy;          // bounce direction signs
    double phase;           // circular / expanding / flicker phase
    double orbit_radius;    // circular
    double lo_x, hi_x, lo_y, hi_y;  // center bounds
};

inline GlyphPose pose_at(const GlyphSpec& gs, const TrajectoryParams& tp, int t) {
    GlyphPose p{tp.cx0, tp.cy0, gs.size, gs.intensity};
    const double v = gs.speed;
    switch (gs.program) {
        case MotionProgram::kHorizontalBounce:
            p.cx = fold(tp.cx0 + tp.sx * v * t, tp.lo_x, tp.hi_x);
            break;
        case MotionProgram::kVerticalBounce:
            p.cy = fold(tp.cy0 + tp.sy * v * t, tp.lo_y, tp.hi_y);
            break;
        case MotionProgram::kDiagonal:
            p.cx = fold(tp.cx0 + tp.sx * v * t, tp.lo_x, tp.hi_x);
            p.cy = fold(tp.cy0 + tp.sy * v * t, tp.lo_y, tp.hi_y);
            break;
        case MotionProgram::kCircular: {
            const double omega = v / tp.orbit_radius;
            p.cx = tp.cx0 + tp.orbit_radius * std::cos(tp.phase + omega * t);
            p.cy = tp.cy0 + tp.orbit_radius * std::sin(tp.phase + omega * t);
            break;
        }
        case MotionProgram::kExpanding:
            p.size = gs.size * (1.0 + 0.4 * std::sin(tp.phase + 0.35 * t));
            break;
        case MotionProgram::kStaticFlicker:
            p.bright = gs.intensity * (0.65 + 0.35 * std::sin(tp.phase + 0.9 * t));
            break;
    }
    return p;
}

inline bool inside_shape(ShapeKind kind, double dx, double dy, double size) {
    switch (kind) {
        case ShapeKind::kSquare: return std::fabs(dx) <= size && std::fabs(dy) <= size;
        case ShapeKind::kDisc: return dx * dx + dy * dy <= size * size;
        case ShapeKind::kDiamond: return std::fabs(dx) + std::fabs(dy) <= size;
    }
    return false;
}

// 4×4 supersampled coverage of the glyph over pixel (row, col).
inline double coverage(ShapeKind kind, const GlyphPose& p, int row, int col) {
    int hit = 0;
    for (int sy = 0; sy < 4; ++sy)
        for (int sx = 0; sx < 4; ++sx) {
            const double x = col + (sx + 0.5) / 4.0;
            const double y = row + (sy + 0.5) / 4.0;
            if (inside_shape(kind, x - p.cx, y - p.cy, p.size)) ++hit;
        }
    return hit / 16.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

// The drawn trajectory, exposed so callers can evaluate the motion program
// analytically (trajectory checks, flow oracles).
struct Trajectory {
    detail::TrajectoryParams params;
};

// Deterministic per (spec, dimensions, rng state). The flow field at frame t
// holds the analytic displacement from frame t−1 inside the glyph's support
// (coverage ≥ 0.5) at frame t and zero elsewhere; flow[0] is zero.
inline VideoClip generate_clip(const GlyphSpec& spec, int t_len, int height, int width,
                               Rng& rng, Trajectory* trajectory_out = nullptr) {
    if (t_len <= 0) throw UsageError("generate_clip: need at least one frame");
    const double max_size =
        spec.size * (spec.program == MotionProgram::kExpanding ? 1.4 : 1.0);
    if (2.0 * max_size + 2.0 >= std::min(height, width))
        throw ConfigError("generate_clip: glyph does not fit inside the frame");

    detail::TrajectoryParams tp{};
    tp.lo_x = max_size + 1.0;
    tp.hi_x = width - max_size - 1.0;
    tp.lo_y = max_size + 1.0;
    tp.hi_y = height - max_size - 1.0;
    tp.sx = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    tp.sy = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    tp.phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    if (spec.program == MotionProgram::kCircular) {
        const double max_orbit =
            0.5 * std::min(tp.hi_x - tp.lo_x, tp.hi_y - tp.lo_y);
        tp.orbit_radius = std::max(2.0, max_orbit * rng.uniform(0.6, 0.9));
        // Orbit center near the frame center, jittered within the slack.
        const double slack_x = 0.5 * (tp.hi_x - tp.lo_x) - tp.orbit_radius;
        const double slack_y = 0.5 * (tp.hi_y - tp.lo_y) - tp.orbit_radius;
        tp.cx0 = 0.5 * (tp.lo_x + tp.hi_x) + rng.uniform(-1.0, 1.0) * std::max(0.0, slack_x);
        tp.cy0 = 0.5 * (tp.lo_y + tp.hi_y) + rng.uniform(-1.0, 1.0) * std::max(0.0, slack_y);
    } else {
        tp.cx0 = rng.uniform(tp.lo_x, tp.hi_x);
        tp.cy0 = rng.uniform(tp.lo_y, tp.hi_y);
    }

    if (trajectory_out) trajectory_out->params = tp;

    // Static clutter: a few smooth bumps, fixed for the whole clip.
    Tensor background({height, width, 1});
    const int bumps = static_cast<int>(std::lround(6.0 * spec.clutter));
    for (int b = 0; b < bumps; ++b) {
        const double bx = rng.uniform(0.0, width);
        const double by = rng.uniform(0.0, height);
        const double bs = rng.uniform(2.0, 5.0);
        const double amp = rng.uniform(0.08, 0.3) * spec.clutter;
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c) {
                const double d2 = (c + 0.5 - bx) * (c + 0.5 - bx) +
                                  (r + 0.5 - by) * (r + 0.5 - by);
                background.at(r, c, 0) += amp * std::exp(-d2 / (2.0 * bs * bs));
            }
    }
    for (int i = 0; i < background.size(); ++i)
        background[i] = std::min(background[i], 0.45);

    VideoClip clip;
    clip.height = height;
    clip.width = width;
    clip.label = static_cast<int>(spec.program);
    detail::GlyphPose prev_pose{};
    for (int t = 0; t < t_len; ++t) {
        const detail::GlyphPose pose = detail::pose_at(spec, tp, t);
        Tensor frame = background;
        Tensor flow({height, width, 2});
        int min_r = height, max_r = -1, min_c = width, max_c = -1;
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c) {
                const double cov = detail::coverage(spec.shape, pose, r, c);
                if (cov > 0.0) {
                    double& px = frame.at(r, c, 0);
                    px = px * (1.0 - cov) + pose.bright * cov;
                }
                if (cov >= 0.5) {
                    min_r = std::min(min_r, r);
                    max_r = std::max(max_r, r);
                    min_c = std::min(min_c, c);
                    max_c = std::max(max_c, c);
                    if (t > 0) {
                        if (spec.program == MotionProgram::kExpanding) {
                            const double ratio = 1.0 - prev_pose.size / pose.size;
                            flow.at(r, c, 0) = (c + 0.5 - pose.cx) * ratio;
                            flow.at(r, c, 1) = (r + 0.5 - pose.cy) * ratio;
                        } else if (spec.program != MotionProgram::kStaticFlicker) {
                            flow.at(r, c, 0) = pose.cx - prev_pose.cx;
                            flow.at(r, c, 1) = pose.cy - prev_pose.cy;
                        }
                    }
                }
            }
        if (spec.noise_sigma > 0.0)
            for (int i = 0; i < frame.size(); ++i)
                frame[i] = std::clamp(frame[i] + rng.normal(0.0, spec.noise_sigma), 0.0, 1.0);

        if (max_r < 0) throw ConfigError("generate_clip: glyph has empty support");
        clip.frames.push_back(std::move(frame));
        clip.flow.push_back(std::move(flow));
        clip.gt_boxes.push_back(Box{static_cast<double>(min_c), static_cast<double>(min_r),
                                    static_cast<double>(max_c + 1),
                                    static_cast<double>(max_r + 1)});
        prev_pose = pose;
    }
    return clip;
}

// Analytic glyph pose at frame t for a drawn trajectory.
inline detail::GlyphPose analytic_pose(const GlyphSpec& spec, const Trajectory& traj, int t) {
    return detail::pose_at(spec, traj.params, t);
}

// ---------------------------------------------------------------------------
// Flow encoding and estimation
// ---------------------------------------------------------------------------

// Fixed rescale range: ±8 px/frame covers every generator speed.
inline constexpr double kFlowImageRange = 8.0;

// Linear map [−R, R] → [0, 255], clamped and discretized to integer levels;
// zero flow maps to 127.5 before rounding.
inline Tensor flow_to_image(const Tensor& flow) {
    ops::check(flow.ndim() == 3 && flow.extent(2) == 2, "flow_to_image: expects H×W×2");
    Tensor img = Tensor::zeros_like(flow);
    for (int i = 0; i < flow.size(); ++i) {
        const double scaled =
            (flow[i] + kFlowImageRange) / (2.0 * kFlowImageRange) * 255.0;
        img[i] = std::round(std::clamp(scaled, 0.0, 255.0));
    }
    return img;
}

inline Tensor image_to_flow(const Tensor& img) {
    Tensor flow = Tensor::zeros_like(img);
    for (int i = 0; i < img.size(); ++i)
        flow[i] = img[i] / 255.0 * 2.0 * kFlowImageRange - kFlowImageRange;
    return flow;
}

// Integer block matching between two frames: for every `block`-sized tile of
// frame_b, the displacement within ±radius minimizing the sum of absolute
// differences against frame_a, ties broken toward zero displacement. The
// field follows the generator convention: frame_b(x) ≈ frame_a(x − d(x)).
inline Tensor block_matching_flow(const Tensor& frame_a, const Tensor& frame_b, int block,
                                  int radius) {
    ops::check(frame_a.same_shape(frame_b), "block_matching_flow: frame shapes differ");
    ops::check(frame_a.ndim() == 3 && frame_a.extent(2) == 1,
               "block_matching_flow: expects H×W×1 frames");
    if (block <= 0 || radius < 0)
        throw ConfigError("block_matching_flow: block must be positive, radius nonnegative");
    const int h = frame_a.extent(0), w = frame_a.extent(1);
    Tensor field({h, w, 2});
    for (int br = 0; br < h; br += block) {
        for (int bc = 0; bc < w; bc += block) {
            const int r1 = std::min(br + block, h), c1 = std::min(bc + block, w);
            double best_sad = std::numeric_limits<double>::infinity();
            int best_dx = 0, best_dy = 0, best_norm = 0;
            for (int dy = -radius; dy <= radius; ++dy) {
                for (int dx = -radius; dx <= radius; ++dx) {
                    if (br - dy < 0 || bc - dx < 0 || r1 - dy > h || c1 - dx > w) continue;
                    double sad = 0.0;
                    for (int r = br; r < r1; ++r)
                        for (int c = bc; c < c1; ++c)
                            sad += std::fabs(frame_b.at(r, c, 0) - frame_a.at(r - dy, c - dx, 0));
                    const int norm = dx * dx + dy * dy;
                    if (sad < best_sad || (sad == best_sad && norm < best_norm)) {
                        best_sad = sad;
                        best_dx = dx;
                        best_dy = dy;
                        best_norm = norm;
                    }
                }
            }
            for (int r = br; r < r1; ++r)
                for (int c = bc; c < c1; ++c) {
                    field.at(r, c, 0) = best_dx;
                    field.at(r, c, 1) = best_dy;
                }
        }
    }
    return field;
}

// ---------------------------------------------------------------------------
// Clip container: "VLSM1" magic, extents, then frames, flow and boxes as
// little-endian 32-bit floats. Boxes are mirrored to a JSON sidecar.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_i32(std::ostream& os, int32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

inline int32_t read_i32(std::istream& is) {
    int32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (is.gcount() != 4) throw FormatError("clip: truncated header");
    return v;
}

inline void write_f32s(std::ostream& os, const Tensor& t) {
    std::vector<float> buf(static_cast<size_t>(t.size()));
    for (int i = 0; i < t.size(); ++i) buf[static_cast<size_t>(i)] = static_cast<float>(t[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * 4));
}

inline void read_f32s(std::istream& is, Tensor& t) {
    std::vector<float> buf(static_cast<size_t>(t.size()));
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * 4));
    if (is.gcount() != static_cast<std::streamsize>(buf.size() * 4))
        throw FormatError("clip: truncated payload");
    for (int i = 0; i < t.size(); ++i) t[i] = buf[static_cast<size_t>(i)];
}

}  // namespace detail

inline constexpr char kClipMagic[6] = "VLSM1";

inline void write_clip(const VideoClip& clip, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("write_clip: cannot write " + path);
    os.write(kClipMagic, 5);
    detail::write_i32(os, static_cast<int32_t>(clip.frames.size()));
    detail::write_i32(os, clip.height);
    detail::write_i32(os, clip.width);
    detail::write_i32(os, clip.label);
    for (const Tensor& f : clip.frames) detail::write_f32s(os, f);
    for (const Tensor& f : clip.flow) detail::write_f32s(os, f);
    for (const Box& b : clip.gt_boxes) {
        Tensor t({4});
        t[0] = b.x0;
        t[1] = b.y0;
        t[2] = b.x1;
        t[3] = b.y1;
        detail::write_f32s(os, t);
    }
    if (!os) throw IoError("write_clip: write failed for " + path);

    nlohmann::ordered_json sidecar = nlohmann::ordered_json::array();
    for (const Box& b : clip.gt_boxes)
        sidecar.push_back({b.x0, b.y0, b.x1, b.y1});
    std::ofstream js(path + ".boxes.json");
    if (!js) throw IoError("write_clip: cannot write box sidecar for " + path);
    js << sidecar.dump() << '\n';
}

inline VideoClip read_clip(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read_clip: cannot read " + path);
    char magic[5];
    is.read(magic, 5);
    if (is.gcount() != 5) throw FormatError("clip: truncated magic");
    if (std::memcmp(magic, kClipMagic, 5) != 0)
        throw FormatError("clip: expected version " + std::string(kClipMagic) + ", found " +
                          std::string(magic, 5));
    VideoClip clip;
    const int32_t t_len = detail::read_i32(is);
    clip.height = detail::read_i32(is);
    clip.width = detail::read_i32(is);
    clip.label = detail::read_i32(is);
    if (t_len <= 0 || clip.height <= 0 || clip.width <= 0)
        throw FormatError("clip: bad extents");
    for (int t = 0; t < t_len; ++t) {
        Tensor f({clip.height, clip.width, 1});
        detail::read_f32s(is, f);
        clip.frames.push_back(std::move(f));
    }
    for (int t = 0; t < t_len; ++t) {
        Tensor f({clip.height, clip.width, 2});
        detail::read_f32s(is, f);
        clip.flow.push_back(std::move(f));
    }
    for (int t = 0; t < t_len; ++t) {
        Tensor b({4});
        detail::read_f32s(is, b);
        clip.gt_boxes.push_back(Box{b[0], b[1], b[2], b[3]});
    }
    return clip;
}

// ---------------------------------------------------------------------------
// Dataset builder and manifest
// ---------------------------------------------------------------------------

struct DatasetConfig {
    int classes = 6;
    int train_per_class = 50;
    int test_per_class = 20;
    int frame_size = 32;
    int clip_frames = 16;
    double glyph_size = 5.0;
    double noise_sigma = 0.02;
    double clutter = 0.3;
    uint64_t seed = 0;

    void validate() const {
        if (classes < 1 || classes > kNumMotionPrograms)
            throw ConfigError("dataset: classes must lie in [1, " +
                              std::to_string(kNumMotionPrograms) + "]");
        if (train_per_class < 1 || test_per_class < 0)
            throw ConfigError("dataset: clip counts must be positive");
        if (2.0 * glyph_size * 1.4 * 1.2 + 2.0 >= frame_size)
            throw ConfigError("dataset: glyph size too large for the frame");
        if (clip_frames < 1) throw ConfigError("dataset: clips need at least one frame");
    }
};

struct DatasetEntry {
    std::string path;  // relative to the manifest directory
    int label = 0;
    std::string split;  // "train" or "test"
};

struct DatasetManifest {
    DatasetConfig config;
    std::vector<std::string> class_names;
    std::vector<DatasetEntry> entries;
};

// Appearance attributes are drawn independently of the class so motion is the
// only separating signal.
inline GlyphSpec random_glyph(const DatasetConfig& cfg, int label, Rng& rng) {
    GlyphSpec gs;
    gs.shape = static_cast<ShapeKind>(rng.uniform_int(0, 2));
    gs.size = cfg.glyph_size * rng.uniform(0.8, 1.2);
    gs.intensity = rng.uniform(0.65, 1.0);
    gs.program = static_cast<MotionProgram>(label);
    gs.speed = rng.uniform(1.4, 2.4);
    gs.clutter = cfg.clutter;
    gs.noise_sigma = cfg.noise_sigma;
    return gs;
}

inline DatasetManifest build_dataset(const std::string& dir, const DatasetConfig& cfg) {
    namespace fs = std::filesystem;
    cfg.validate();
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "clips", ec);
    if (ec) throw IoError("build_dataset: cannot create " + dir + ": " + ec.message());

    DatasetManifest manifest;
    manifest.config = cfg;
    for (int c = 0; c < cfg.classes; ++c) manifest.class_names.push_back(motion_program_name(c));

    Rng rng(cfg.seed);
    auto emit = [&](const std::string& split, int per_class) {
        for (int i = 0; i < per_class; ++i) {
            for (int label = 0; label < cfg.classes; ++label) {
                GlyphSpec gs = random_glyph(cfg, label, rng);
                VideoClip clip =
                    generate_clip(gs, cfg.clip_frames, cfg.frame_size, cfg.frame_size, rng);
                char name[64];
                std::snprintf(name, sizeof(name), "clips/%s_%04d_c%d.clip", split.c_str(), i,
                              label);
                write_clip(clip, (fs::path(dir) / name).string());
                manifest.entries.push_back({name, label, split});
            }
        }
    };
    emit("train", cfg.train_per_class);
    emit("test", cfg.test_per_class);

    nlohmann::ordered_json j;
    j["format"] = "vlsm-dataset";
    j["version"] = 1;
    j["config"] = {{"classes", cfg.classes},
                   {"train_per_class", cfg.train_per_class},
                   {"test_per_class", cfg.test_per_class},
                   {"frame_size", cfg.frame_size},
                   {"clip_frames", cfg.clip_frames},
                   {"glyph_size", cfg.glyph_size},
                   {"noise_sigma", cfg.noise_sigma},
                   {"clutter", cfg.clutter},
                   {"seed", cfg.seed}};
    j["class_names"] = manifest.class_names;
    auto clips = nlohmann::ordered_json::array();
    for (const auto& e : manifest.entries)
        clips.push_back({{"path", e.path}, {"label", e.label}, {"split", e.split}});
    j["clips"] = std::move(clips);

    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw IoError("build_dataset: cannot write manifest in " + dir);
    mf << j.dump(2) << '\n';
    return manifest;
}

inline DatasetManifest load_manifest(const std::string& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw IoError("load_manifest: cannot read " + manifest_path);
    nlohmann::json j;
    try {
        mf >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_manifest: bad JSON: ") + e.what());
    }
    if (j.value("format", "") != "vlsm-dataset")
        throw FormatError("load_manifest: not a dataset manifest");
    DatasetManifest m;
    const auto& c = j.at("config");
    m.config.classes = c.at("classes").get<int>();
    m.config.train_per_class = c.at("train_per_class").get<int>();
    m.config.test_per_class = c.at("test_per_class").get<int>();
    m.config.frame_size = c.at("frame_size").get<int>();
    m.config.clip_frames = c.at("clip_frames").get<int>();
    m.config.glyph_size = c.at("glyph_size").get<double>();
    m.config.noise_sigma = c.at("noise_sigma").get<double>();
    m.config.clutter = c.at("clutter").get<double>();
    m.config.seed = c.at("seed").get<uint64_t>();
    for (const auto& n : j.at("class_names")) m.class_names.push_back(n.get<std::string>());
    for (const auto& e : j.at("clips"))
        m.entries.push_back({e.at("path").get<std::string>(), e.at("label").get<int>(),
                             e.at("split").get<std::string>()});
    return m;
}

}  // namespace vlsm
