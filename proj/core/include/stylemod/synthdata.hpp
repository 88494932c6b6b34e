#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "stylemod/image.hpp"
#include "stylemod/rng.hpp"

namespace stylemod {

// --------------------------------------------------------------- vocabularies

enum class Shape { Circle, Square, Triangle, Cross };
enum class FillColor { Red, Green, Blue, Yellow, Magenta, Cyan };
enum class SizeClass { Small, Large };
enum class Background { White, Black, Gray, Navy };

inline constexpr int kNumShapes = 4;
inline constexpr int kNumFillColors = 6;
inline constexpr int kNumSizes = 2;
inline constexpr int kNumBackgrounds = 4;

const char* to_word(Shape s);
const char* to_word(FillColor c);
const char* to_word(SizeClass s);
const char* to_word(Background b);

// Attribute slots, in caption template order: size, color, shape, background.
enum class Slot { Size = 0, Color = 1, Shape = 2, Background = 3 };
inline constexpr int kNumSlots = 4;

struct ShapeScene {
    Shape shape = Shape::Circle;
    FillColor fill_color = FillColor::Red;
    SizeClass size = SizeClass::Small;
    Background background = Background::White;
    int offset_x = 0;  // object centre offset from canvas centre, pixels
    int offset_y = 0;

    int attribute(Slot s) const {
        switch (s) {
            case Slot::Size: return static_cast<int>(size);
            case Slot::Color: return static_cast<int>(fill_color);
            case Slot::Shape: return static_cast<int>(shape);
            case Slot::Background: return static_cast<int>(background);
        }
        return -1;
    }
};

// Fixed-order template caption. attribute_mask[i] says whether slot i is
// mentioned; tokens holds the mentioned slots' words in template order.
struct Caption {
    std::vector<std::string> tokens;
    std::array<bool, kNumSlots> attribute_mask{};

    static Caption full(const ShapeScene& scene);
    static Caption masked(const ShapeScene& scene, const std::array<bool, kNumSlots>& mask);
    std::string text() const;
};

// Re-parses a caption back into attribute indices (-1 where unmentioned).
// Throws on tokens outside the vocabulary.
std::array<int, kNumSlots> parse_caption(const Caption& cap);
std::array<int, kNumSlots> parse_caption_text(const std::string& text);

// Object radius in pixels; independent of canvas so small canvases can reject
// large objects.
int object_radius(SizeClass s);

// --------------------------------------------------------------- rendering

// Deterministic rasterization. Throws if the object does not fit fully inside
// the canvas, or canvas < 16.
Image render_scene(const ShapeScene& scene, int canvas);

// --------------------------------------------------------------- domains

enum class DomainTransform { Invert, Stripes, Sketch, Blur, Sepia, Checker, Posterize, Grain };

const char* to_word(DomainTransform t);
DomainTransform transform_from_name(const std::string& name);

struct DomainParams {
    int stripe_period = 4;
    bool stripes_vertical = false;
    double blur_sigma = 1.0;
    int checker_period = 4;
    int posterize_levels = 4;
    double grain_strength = 0.25;
    std::uint64_t grain_seed = 1;
};

struct DomainSpec {
    std::string name;
    DomainTransform transform = DomainTransform::Invert;
    DomainParams params;
    Image exemplar;                  // the single one-shot exemplar
    std::optional<Caption> caption;  // optional text description
};

Image apply_domain_transform(const Image& img, const DomainSpec& spec);

// The fixed domain roster: 8 training domains, then 2 held-out domains
// (posterize, grain) used for the zero-shot probes. Exemplars are rendered
// from per-domain scenes derived from `seed`.
std::vector<DomainSpec> make_domain_roster(int canvas, std::uint64_t seed, bool include_held_out);
inline constexpr int kNumTrainDomains = 8;

// --------------------------------------------------------------- datasets

struct Sample {
    Image image;
    Caption caption;
    ShapeScene scene;  // the attribute labels
};

// n reproducible samples; sample i derives its own stream from (seed, i).
std::vector<Sample> make_dataset(int n, std::uint64_t seed, int canvas = 32);

ShapeScene random_scene(Rng& rng, int canvas);

// Dataset manifest: one JSON-lines record per sample plus PPM images.
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);
std::vector<Sample> load_dataset(const std::filesystem::path& dir);

}  // namespace stylemod
