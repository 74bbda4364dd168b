#include "ppdeid/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ppdeid/core/error.hpp"
#include "ppdeid/core/hash.hpp"
#include "ppdeid/core/rng.hpp"

namespace ppdeid {

namespace {

struct FaceGeometry {
    double cx, cy;          // head center
    double rx, ry;          // head radii
    double skin;            // base gray level
    double eye_dx, eye_y;   // eye offsets from center
    double eye_rx, eye_ry;
    double eye_dark;
    double brow_y, brow_tilt, brow_len;
    double nose_len, nose_w, nose_dark;
    double mouth_y, mouth_w, mouth_h, mouth_dark, mouth_curve;
    int wrinkles;
    double wrinkle_y0;
};

double smoothstep(double edge0, double edge1, double x) {
    double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

/// Soft-edged filled ellipse: returns coverage in [0,1].
double ellipse_mask(double x, double y, double cx, double cy, double rx, double ry,
                    double soft = 1.5) {
    double dx = (x - cx) / rx, dy = (y - cy) / ry;
    double d = std::sqrt(dx * dx + dy * dy);
    double edge = soft / std::min(rx, ry);
    return 1.0 - smoothstep(1.0 - edge, 1.0 + edge, d);
}

double line_mask(double x, double y, double x0, double y0, double x1, double y1,
                 double thickness) {
    double vx = x1 - x0, vy = y1 - y0;
    double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? std::clamp(((x - x0) * vx + (y - y0) * vy) / len2, 0.0, 1.0) : 0.0;
    double px = x0 + t * vx, py = y0 + t * vy;
    double d = std::hypot(x - px, y - py);
    return 1.0 - smoothstep(thickness - 0.8, thickness + 0.8, d);
}

FaceGeometry subject_geometry(const SyntheticFaceSpec& spec) {
    Rng rng(derive_seed(fnv1a64(spec.subject_id), 0xfaceULL));
    FaceGeometry g{};
    g.cx = 64.0;
    g.cy = 66.0;

    // Inter-subject geometric spread is deliberately large so identities
    // are separable by a small embedding network.
    double aspect = spec.age_band == AgeBand::youth ? 0.82
                    : spec.age_band == AgeBand::middle ? 0.92
                                                       : 1.02;
    g.ry = rng.uniform(46.0, 56.0);
    g.rx = g.ry * (aspect + rng.uniform(-0.06, 0.06));
    g.skin = spec.race == Race::black ? rng.uniform(0.30, 0.42) : rng.uniform(0.62, 0.78);

    g.eye_dx = rng.uniform(13.0, 22.0);
    g.eye_y = g.cy - rng.uniform(10.0, 18.0);
    g.eye_rx = rng.uniform(4.0, 8.0);
    g.eye_ry = g.eye_rx * rng.uniform(0.45, 0.8);
    g.eye_dark = rng.uniform(0.04, 0.14);

    g.brow_y = g.eye_y - rng.uniform(7.0, 12.0);
    g.brow_tilt = rng.uniform(-3.0, 3.0);
    g.brow_len = rng.uniform(8.0, 14.0);

    g.nose_len = rng.uniform(12.0, 22.0);
    g.nose_w = rng.uniform(2.5, 6.0);
    g.nose_dark = g.skin * rng.uniform(0.55, 0.8);

    g.mouth_y = g.cy + rng.uniform(20.0, 30.0);
    g.mouth_w = rng.uniform(10.0, 20.0);
    g.mouth_h = rng.uniform(2.5, 5.5);
    g.mouth_dark = rng.uniform(0.08, 0.22);
    g.mouth_curve = rng.uniform(-2.5, 2.5);

    g.wrinkles = spec.age_band == AgeBand::youth ? 0 : spec.age_band == AgeBand::middle ? 1 : 3;
    g.wrinkle_y0 = g.cy - g.ry * 0.62;
    return g;
}

} // namespace

GrayImage render_synthetic_face(const SyntheticFaceSpec& spec, uint64_t seed,
                                int image_index) {
    FaceGeometry g = subject_geometry(spec);

    Rng jrng(derive_seed(seed, fnv1a64(spec.subject_id), static_cast<uint64_t>(image_index)));
    const double jx = jrng.uniform(-2.5, 2.5);
    const double jy = jrng.uniform(-2.5, 2.5);
    const double jscale = 1.0 + jrng.uniform(-0.03, 0.03);
    const double jbright = jrng.uniform(-0.05, 0.05);
    const double bg = 0.12 + jrng.uniform(0.0, 0.08);

    GrayImage img(kFaceSize, kFaceSize);
    for (int yi = 0; yi < kFaceSize; ++yi) {
        for (int xi = 0; xi < kFaceSize; ++xi) {
            // Map pixel into jittered face coordinates.
            double x = (xi - g.cx - jx) / jscale + g.cx;
            double y = (yi - g.cy - jy) / jscale + g.cy;

            double v = bg + 0.05 * (yi / 127.0); // mild background gradient

            double head = ellipse_mask(x, y, g.cx, g.cy, g.rx, g.ry);
            if (head > 0.0) {
                // gentle shading toward the face rim
                double dx = (x - g.cx) / g.rx, dy = (y - g.cy) / g.ry;
                double shade = 1.0 - 0.25 * (dx * dx + dy * dy);
                double face = g.skin * shade;

                for (int side = -1; side <= 1; side += 2) {
                    double ex = g.cx + side * g.eye_dx;
                    double eye = ellipse_mask(x, y, ex, g.eye_y, g.eye_rx, g.eye_ry);
                    face = face * (1.0 - eye) + g.eye_dark * eye;
                    double brow =
                        line_mask(x, y, ex - g.brow_len / 2, g.brow_y - side * g.brow_tilt,
                                  ex + g.brow_len / 2, g.brow_y + side * g.brow_tilt, 1.4);
                    face = face * (1.0 - brow) + (g.eye_dark + 0.05) * brow;
                }

                double nose = line_mask(x, y, g.cx, g.cy - 2.0, g.cx, g.cy + g.nose_len, g.nose_w);
                face = face * (1.0 - 0.5 * nose) + g.nose_dark * 0.5 * nose;

                double mouth_cy = g.mouth_y + g.mouth_curve * std::pow((x - g.cx) / g.mouth_w, 2.0);
                double mouth = ellipse_mask(x, y, g.cx, mouth_cy, g.mouth_w, g.mouth_h);
                face = face * (1.0 - mouth) + g.mouth_dark * mouth;

                for (int k = 0; k < g.wrinkles; ++k) {
                    double wy = g.wrinkle_y0 + 4.5 * k;
                    double wrinkle = line_mask(x, y, g.cx - g.rx * 0.4, wy, g.cx + g.rx * 0.4, wy, 0.9);
                    face = face * (1.0 - 0.35 * wrinkle) + g.skin * 0.5 * 0.35 * wrinkle;
                }

                v = v * (1.0 - head) + face * head;
            }

            v += jbright + 0.01 * jrng.normal();
            img.at(yi, xi) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return img;
}

std::string generate_synthetic_dataset(const std::string& out_dir,
                                       const SyntheticDatasetOptions& options) {
    namespace fs = std::filesystem;
    if (options.subjects < 1 || options.per_subject < 1)
        raise("data_pipeline", "InvalidArgument", "subjects and per_subject must be >= 1");
    fs::create_directories(out_dir);

    const AgeBand bands[3] = {AgeBand::youth, AgeBand::middle, AgeBand::senior};
    const int band_age[3] = {21, 32, 52};

    std::ofstream manifest(fs::path(out_dir) / "manifest.csv");
    if (!manifest) raise("data_pipeline", "IoError", "cannot write manifest in " + out_dir);
    manifest << "image_path,subject_id,gender,race,age\n";

    for (int s = 0; s < options.subjects; ++s) {
        SyntheticFaceSpec spec;
        char sid[16];
        std::snprintf(sid, sizeof(sid), "s%03d", s);
        spec.subject_id = sid;
        spec.race = (s % 2 == 0) ? Race::black : Race::white;
        spec.age_band = bands[(s / 2) % 3];
        const int age = band_age[(s / 2) % 3];

        for (int i = 0; i < options.per_subject; ++i) {
            GrayImage img = render_synthetic_face(spec, options.seed, i);
            char name[32];
            std::snprintf(name, sizeof(name), "%s_%02d.png", sid, i);
            write_gray_image(img, (fs::path(out_dir) / name).string());
            manifest << name << "," << spec.subject_id << ",male," << to_string(spec.race) << ","
                     << age << "\n";
        }
    }
    return (fs::path(out_dir) / "manifest.csv").string();
}

} // namespace ppdeid
