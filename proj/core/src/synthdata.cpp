#include "stylemod/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace stylemod {

namespace {

struct Rgb {
    double r, g, b;
};

Rgb fill_rgb(FillColor c) {
    switch (c) {
        case FillColor::Red: return {0.90, 0.10, 0.10};
        case FillColor::Green: return {0.10, 0.75, 0.15};
        case FillColor::Blue: return {0.15, 0.25, 0.90};
        case FillColor::Yellow: return {0.95, 0.85, 0.10};
        case FillColor::Magenta: return {0.85, 0.15, 0.80};
        case FillColor::Cyan: return {0.10, 0.80, 0.85};
    }
    return {0, 0, 0};
}

Rgb background_rgb(Background b) {
    switch (b) {
        case Background::White: return {0.97, 0.97, 0.97};
        case Background::Black: return {0.05, 0.05, 0.05};
        case Background::Gray: return {0.55, 0.55, 0.55};
        case Background::Navy: return {0.08, 0.10, 0.35};
    }
    return {0, 0, 0};
}

// Supersampled coverage test: fraction of 3x3 subsamples inside the shape.
double coverage(Shape shape, double cx, double cy, double radius, int px, int py) {
    int hit = 0;
    for (int sy = 0; sy < 3; ++sy)
        for (int sx = 0; sx < 3; ++sx) {
            const double x = px + (sx + 0.5) / 3.0 - cx;
            const double y = py + (sy + 0.5) / 3.0 - cy;
            bool inside = false;
            switch (shape) {
                case Shape::Circle:
                    inside = x * x + y * y <= radius * radius;
                    break;
                case Shape::Square:
                    inside = std::abs(x) <= radius * 0.85 && std::abs(y) <= radius * 0.85;
                    break;
                case Shape::Triangle: {
                    // upright triangle inscribed in the radius
                    const double top = -radius, bottom = radius * 0.8;
                    if (y >= top && y <= bottom) {
                        const double half = radius * (y - top) / (bottom - top);
                        inside = std::abs(x) <= half;
                    }
                    break;
                }
                case Shape::Cross: {
                    const double arm = radius * 0.35;
                    inside = (std::abs(x) <= arm && std::abs(y) <= radius) ||
                             (std::abs(y) <= arm && std::abs(x) <= radius);
                    break;
                }
            }
            if (inside) ++hit;
        }
    return hit / 9.0;
}

}  // namespace

const char* to_word(Shape s) {
    switch (s) {
        case Shape::Circle: return "circle";
        case Shape::Square: return "square";
        case Shape::Triangle: return "triangle";
        case Shape::Cross: return "cross";
    }
    return "?";
}
const char* to_word(FillColor c) {
    switch (c) {
        case FillColor::Red: return "red";
        case FillColor::Green: return "green";
        case FillColor::Blue: return "blue";
        case FillColor::Yellow: return "yellow";
        case FillColor::Magenta: return "magenta";
        case FillColor::Cyan: return "cyan";
    }
    return "?";
}
const char* to_word(SizeClass s) { return s == SizeClass::Small ? "small" : "large"; }
const char* to_word(Background b) {
    switch (b) {
        case Background::White: return "white";
        case Background::Black: return "black";
        case Background::Gray: return "gray";
        case Background::Navy: return "navy";
    }
    return "?";
}
const char* to_word(DomainTransform t) {
    switch (t) {
        case DomainTransform::Invert: return "invert";
        case DomainTransform::Stripes: return "stripes";
        case DomainTransform::Sketch: return "sketch";
        case DomainTransform::Blur: return "blur";
        case DomainTransform::Sepia: return "sepia";
        case DomainTransform::Checker: return "checker";
        case DomainTransform::Posterize: return "posterize";
        case DomainTransform::Grain: return "grain";
    }
    return "?";
}

DomainTransform transform_from_name(const std::string& name) {
    static const std::map<std::string, DomainTransform> table = {
        {"invert", DomainTransform::Invert},       {"stripes", DomainTransform::Stripes},
        {"sketch", DomainTransform::Sketch},       {"blur", DomainTransform::Blur},
        {"sepia", DomainTransform::Sepia},         {"checker", DomainTransform::Checker},
        {"posterize", DomainTransform::Posterize}, {"grain", DomainTransform::Grain},
    };
    auto it = table.find(name);
    if (it == table.end()) throw std::invalid_argument("unknown transform: " + name);
    return it->second;
}

int object_radius(SizeClass s) { return s == SizeClass::Small ? 5 : 9; }

Caption Caption::full(const ShapeScene& scene) {
    return masked(scene, {true, true, true, true});
}

Caption Caption::masked(const ShapeScene& scene, const std::array<bool, kNumSlots>& mask) {
    Caption cap;
    cap.attribute_mask = mask;
    if (mask[static_cast<int>(Slot::Size)]) cap.tokens.push_back(to_word(scene.size));
    if (mask[static_cast<int>(Slot::Color)]) cap.tokens.push_back(to_word(scene.fill_color));
    if (mask[static_cast<int>(Slot::Shape)]) cap.tokens.push_back(to_word(scene.shape));
    if (mask[static_cast<int>(Slot::Background)]) cap.tokens.push_back(to_word(scene.background));
    return cap;
}

std::string Caption::text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += " ";
        out += tokens[i];
    }
    return out;
}

namespace {
// word -> (slot, index); built once
const std::map<std::string, std::pair<Slot, int>>& word_table() {
    static const std::map<std::string, std::pair<Slot, int>> table = [] {
        std::map<std::string, std::pair<Slot, int>> t;
        for (int i = 0; i < kNumSizes; ++i)
            t[to_word(static_cast<SizeClass>(i))] = {Slot::Size, i};
        for (int i = 0; i < kNumFillColors; ++i)
            t[to_word(static_cast<FillColor>(i))] = {Slot::Color, i};
        for (int i = 0; i < kNumShapes; ++i)
            t[to_word(static_cast<Shape>(i))] = {Slot::Shape, i};
        for (int i = 0; i < kNumBackgrounds; ++i)
            t[to_word(static_cast<Background>(i))] = {Slot::Background, i};
        return t;
    }();
    return table;
}
}  // namespace

std::array<int, kNumSlots> parse_caption(const Caption& cap) {
    std::array<int, kNumSlots> out;
    out.fill(-1);
    for (const std::string& tok : cap.tokens) {
        auto it = word_table().find(tok);
        if (it == word_table().end()) throw std::invalid_argument("unknown caption token: " + tok);
        out[static_cast<int>(it->second.first)] = it->second.second;
    }
    return out;
}

std::array<int, kNumSlots> parse_caption_text(const std::string& text) {
    Caption cap;
    std::string cur;
    for (char c : text + " ") {
        if (c == ' ') {
            if (!cur.empty()) cap.tokens.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return parse_caption(cap);
}

Image render_scene(const ShapeScene& scene, int canvas) {
    if (canvas < 16) throw std::invalid_argument("render_scene: canvas must be >= 16");
    const int radius = object_radius(scene.size);
    const double cx = canvas / 2.0 + scene.offset_x;
    const double cy = canvas / 2.0 + scene.offset_y;
    if (cx - radius < 0 || cx + radius > canvas || cy - radius < 0 || cy + radius > canvas)
        throw std::invalid_argument("render_scene: object exceeds canvas bounds");

    const Rgb bg = background_rgb(scene.background);
    const Rgb fg = fill_rgb(scene.fill_color);
    Image img = make_image(canvas, canvas);
    for (int y = 0; y < canvas; ++y)
        for (int x = 0; x < canvas; ++x) {
            const double a = coverage(scene.shape, cx, cy, radius, x, y);
            img.at3(0, y, x) = bg.r + a * (fg.r - bg.r);
            img.at3(1, y, x) = bg.g + a * (fg.g - bg.g);
            img.at3(2, y, x) = bg.b + a * (fg.b - bg.b);
        }
    return img;
}

namespace {

Image gaussian_blur(const Image& img, double sigma) {
    const int h = img.dim(1), w = img.dim(2);
    const int r = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double s = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
        s += k[static_cast<std::size_t>(i + r)];
    }
    for (auto& x : k) x /= s;
    auto reflect = [](int i, int n) {
        if (i < 0) return -i - 1;
        if (i >= n) return 2 * n - i - 1;
        return i;
    };
    Image tmp = img, out = img;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += k[static_cast<std::size_t>(i + r)] * img.at3(c, y, reflect(x + i, w));
                tmp.at3(c, y, x) = acc;
            }
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += k[static_cast<std::size_t>(i + r)] * tmp.at3(c, reflect(y + i, h), x);
                out.at3(c, y, x) = acc;
            }
    return out;
}

}  // namespace

Image apply_domain_transform(const Image& img, const DomainSpec& spec) {
    const int h = img.dim(1), w = img.dim(2);
    Image out = img;
    switch (spec.transform) {
        case DomainTransform::Invert:
            for (auto& x : out.v) x = 1.0 - x;
            break;
        case DomainTransform::Stripes: {
            const int p = spec.params.stripe_period;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const int band = (spec.params.stripes_vertical ? x : y) / p;
                        if (band % 2 == 1) out.at3(c, y, x) *= 0.45;
                    }
            break;
        }
        case DomainTransform::Sketch: {
            // grayscale Sobel magnitude, drawn dark on white
            std::vector<double> gray(static_cast<std::size_t>(h) * w);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    gray[static_cast<std::size_t>(y) * w + x] =
                        (img.at3(0, y, x) + img.at3(1, y, x) + img.at3(2, y, x)) / 3.0;
            auto g = [&](int y, int x) {
                y = std::clamp(y, 0, h - 1);
                x = std::clamp(x, 0, w - 1);
                return gray[static_cast<std::size_t>(y) * w + x];
            };
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double gx = g(y - 1, x + 1) + 2 * g(y, x + 1) + g(y + 1, x + 1) -
                                      g(y - 1, x - 1) - 2 * g(y, x - 1) - g(y + 1, x - 1);
                    const double gy = g(y + 1, x - 1) + 2 * g(y + 1, x) + g(y + 1, x + 1) -
                                      g(y - 1, x - 1) - 2 * g(y - 1, x) - g(y - 1, x + 1);
                    const double m = std::clamp(std::sqrt(gx * gx + gy * gy), 0.0, 1.0);
                    for (int c = 0; c < 3; ++c) out.at3(c, y, x) = 1.0 - m;
                }
            break;
        }
        case DomainTransform::Blur:
            out = gaussian_blur(img, spec.params.blur_sigma);
            break;
        case DomainTransform::Sepia:
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double r = img.at3(0, y, x), g = img.at3(1, y, x), b = img.at3(2, y, x);
                    out.at3(0, y, x) = std::clamp(0.393 * r + 0.769 * g + 0.189 * b, 0.0, 1.0);
                    out.at3(1, y, x) = std::clamp(0.349 * r + 0.686 * g + 0.168 * b, 0.0, 1.0);
                    out.at3(2, y, x) = std::clamp(0.272 * r + 0.534 * g + 0.131 * b, 0.0, 1.0);
                }
            break;
        case DomainTransform::Checker: {
            const int p = spec.params.checker_period;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        if (((y / p) + (x / p)) % 2 == 1)
                            out.at3(c, y, x) = 1.0 - out.at3(c, y, x);
            break;
        }
        case DomainTransform::Posterize: {
            const double levels = spec.params.posterize_levels;
            for (auto& x : out.v)
                x = std::clamp(std::floor(x * levels) / (levels - 1.0), 0.0, 1.0);
            break;
        }
        case DomainTransform::Grain: {
            Rng noise(spec.params.grain_seed);
            for (auto& x : out.v)
                x = std::clamp(x + spec.params.grain_strength * (noise.uniform() - 0.5), 0.0, 1.0);
            break;
        }
    }
    return out;
}

ShapeScene random_scene(Rng& rng, int canvas) {
    ShapeScene s;
    s.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
    s.fill_color = static_cast<FillColor>(rng.uniform_int(0, kNumFillColors - 1));
    s.size = static_cast<SizeClass>(rng.uniform_int(0, kNumSizes - 1));
    s.background = static_cast<Background>(rng.uniform_int(0, kNumBackgrounds - 1));
    const int slack = canvas / 2 - object_radius(s.size);
    if (slack < 1)
        throw std::invalid_argument("random_scene: canvas " + std::to_string(canvas) +
                                    " too small for " +
                                    std::string(to_word(s.size)) + " objects");
    s.offset_x = rng.uniform_int(-slack, slack - 1);
    s.offset_y = rng.uniform_int(-slack, slack - 1);
    return s;
}

std::vector<Sample> make_dataset(int n, std::uint64_t seed, int canvas) {
    if (n < 1) throw std::invalid_argument("make_dataset: n must be >= 1");
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, "synthdata.sample", static_cast<std::uint64_t>(i)));
        Sample s;
        s.scene = random_scene(rng, canvas);
        s.image = render_scene(s.scene, canvas);
        s.caption = Caption::full(s.scene);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<DomainSpec> make_domain_roster(int canvas, std::uint64_t seed, bool include_held_out) {
    struct Entry {
        const char* name;
        DomainTransform t;
        DomainParams p;
    };
    std::vector<Entry> entries = {
        {"invert", DomainTransform::Invert, {}},
        {"stripes_h", DomainTransform::Stripes, {.stripes_vertical = false}},
        {"stripes_v", DomainTransform::Stripes, {.stripes_vertical = true}},
        {"sketch", DomainTransform::Sketch, {}},
        {"blur", DomainTransform::Blur, {.blur_sigma = 1.2}},
        {"sepia", DomainTransform::Sepia, {}},
        {"checker4", DomainTransform::Checker, {.checker_period = 4}},
        {"checker8", DomainTransform::Checker, {.checker_period = 8}},
    };
    if (include_held_out) {
        entries.push_back({"posterize", DomainTransform::Posterize, {.posterize_levels = 3}});
        entries.push_back({"grain", DomainTransform::Grain, {.grain_strength = 0.35, .grain_seed = 99}});
    }
    std::vector<DomainSpec> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        DomainSpec d;
        d.name = entries[i].name;
        d.transform = entries[i].t;
        d.params = entries[i].p;
        Rng rng(derive_seed(seed, "synthdata.domain_exemplar", i));
        const Image base = render_scene(random_scene(rng, canvas), canvas);
        d.exemplar = apply_domain_transform(base, d);
        out.push_back(std::move(d));
    }
    return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
    std::filesystem::create_directories(dir / "images");
    std::ofstream manifest(dir / "manifest.jsonl");
    if (!manifest) throw std::runtime_error("write_dataset: cannot open manifest");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        const std::string rel = "images/" + std::to_string(i) + ".ppm";
        write_ppm(dir / rel, s.image);
        nlohmann::json rec;
        rec["index"] = i;
        rec["size"] = to_word(s.scene.size);
        rec["color"] = to_word(s.scene.fill_color);
        rec["shape"] = to_word(s.scene.shape);
        rec["background"] = to_word(s.scene.background);
        rec["offset"] = {s.scene.offset_x, s.scene.offset_y};
        rec["caption"] = s.caption.text();
        rec["image"] = rel;
        manifest << rec.dump() << "\n";
    }
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "manifest.jsonl");
    if (!manifest) throw std::runtime_error("load_dataset: cannot open manifest in " + dir.string());
    std::vector<Sample> samples;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line);
        Sample s;
        s.image = read_ppm(dir / rec.at("image").get<std::string>());
        const std::string caption = rec.at("caption").get<std::string>();
        std::array<int, kNumSlots> attrs = parse_caption_text(caption);
        for (int k = 0; k < kNumSlots; ++k)
            if (attrs[static_cast<std::size_t>(k)] < 0)
                throw std::runtime_error("load_dataset: partial caption in manifest: " + caption);
        s.scene.size = static_cast<SizeClass>(attrs[0]);
        s.scene.fill_color = static_cast<FillColor>(attrs[1]);
        s.scene.shape = static_cast<Shape>(attrs[2]);
        s.scene.background = static_cast<Background>(attrs[3]);
        if (rec.contains("offset")) {
            s.scene.offset_x = rec["offset"][0].get<int>();
            s.scene.offset_y = rec["offset"][1].get<int>();
        }
        s.caption = Caption::full(s.scene);
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace stylemod
