#include "stylemod/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace stylemod {

namespace {
unsigned char to_byte(double x) {
    return static_cast<unsigned char>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
}
}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& img) {
    if (!is_image(img)) throw std::invalid_argument("write_ppm: expected [3,H,W]");
    const int h = img.dim(1), w = img.dim(2);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path.string());
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<std::size_t>(x) * 3 + c] = to_byte(img.at3(c, y, x));
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    f >> magic >> w >> h >> maxv;
    if (magic != "P6" || maxv != 255 || w <= 0 || h <= 0)
        throw std::runtime_error("read_ppm: unsupported file " + path.string());
    f.get();  // single whitespace after header
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw std::runtime_error("read_ppm: truncated file " + path.string());
    Image img = make_image(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at3(c, y, x) =
                    raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
    return img;
}

Image quantize8(const Image& img) {
    Image out = img;
    for (auto& x : out.v) x = to_byte(x) / 255.0;
    return out;
}

double mean_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mean_abs_diff: shape mismatch");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double mx = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a[i] - b[i]));
    return mx;
}

double mean_pixel(const Image& img) {
    double acc = 0.0;
    for (double x : img.v) acc += x;
    return acc / static_cast<double>(img.size());
}

Image tile_grid(const std::vector<Image>& tiles, int cols) {
    if (tiles.empty()) throw std::invalid_argument("tile_grid: no tiles");
    const int th = tiles[0].dim(1), tw = tiles[0].dim(2);
    const int n = static_cast<int>(tiles.size());
    const int rows = (n + cols - 1) / cols;
    const int gut = 2;
    Image out = Tensor::full({3, rows * th + (rows + 1) * gut, cols * tw + (cols + 1) * gut}, 1.0);
    for (int i = 0; i < n; ++i) {
        if (!tiles[static_cast<std::size_t>(i)].same_shape(tiles[0]))
            throw std::invalid_argument("tile_grid: tiles must share a shape");
        const int r = i / cols, c = i % cols;
        const int oy = gut + r * (th + gut), ox = gut + c * (tw + gut);
        for (int ch = 0; ch < 3; ++ch)
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x)
                    out.at3(ch, oy + y, ox + x) = tiles[static_cast<std::size_t>(i)].at3(ch, y, x);
    }
    return out;
}

}  // namespace stylemod
