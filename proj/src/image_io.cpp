#include "ccswap/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ccswap {
namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return e;
}

unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image read_png(const fs::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        throw IoError("cannot read PNG '" + path.string() + "': " + png.message);
    }
    const int ch = (png.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
    png.format   = ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&png);
        throw IoError("cannot decode PNG '" + path.string() + "': " + png.message);
    }
    const int w = static_cast<int>(png.width);
    const int h = static_cast<int>(png.height);
    Image out(Shape3{ch, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) out.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * ch + c] / 255.0;
    return out;
}

void write_png(const fs::path& path, const Image& img) {
    const int ch = img.channels();
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width   = static_cast<png_uint_32>(img.width());
    png.height  = static_cast<png_uint_32>(img.height());
    png.format  = ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(png));
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < ch; ++c)
                buf[(static_cast<std::size_t>(y) * img.width() + x) * ch + c] = to_byte(img.at(c, y, x));
    if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr)) {
        throw IoError("cannot write PNG '" + path.string() + "': " + png.message);
    }
}

// Next header token of a netpbm file, skipping comments.
int pnm_int(std::istream& in, const fs::path& path) {
    in >> std::ws;
    while (in.peek() == '#') {
        std::string skip;
        std::getline(in, skip);
        in >> std::ws;
    }
    int v = -1;
    if (!(in >> v) || v < 0) throw IoError("malformed header in '" + path.string() + "'");
    return v;
}

Image read_pnm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6") throw IoError("'" + path.string() + "' is not a binary PGM/PPM file");
    const int ch     = magic == "P5" ? 1 : 3;
    const int w      = pnm_int(in, path);
    const int h      = pnm_int(in, path);
    const int maxval = pnm_int(in, path);
    if (maxval != 255) throw IoError("only 8-bit netpbm files are supported ('" + path.string() + "')");
    if (w == 0 || h == 0) throw IoError("empty image '" + path.string() + "'");
    in.get();
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * ch);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
        throw IoError("truncated pixel data in '" + path.string() + "'");
    }
    Image out(Shape3{ch, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) out.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * ch + c] / 255.0;
    return out;
}

void write_pnm(const fs::path& path, const Image& img, int ch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << (ch == 1 ? "P5" : "P6") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> buf(static_cast<std::size_t>(img.width()) * img.height() * ch);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < ch; ++c)
                buf[(static_cast<std::size_t>(y) * img.width() + x) * ch + c] = to_byte(img.at(c, y, x));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

Image read_image(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("image not found: '" + path.string() + "'");
    const std::string ext = lower_ext(path);
    if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
    return read_png(path);
}

void write_image(const fs::path& path, const Image& image) {
    const int ch = image.channels();
    if (ch != 1 && ch != 3) {
        throw IoError("cannot write a " + std::to_string(ch) + "-channel image to '" + path.string() + "'");
    }
    const std::string ext = lower_ext(path);
    if (ext == ".png") return write_png(path, image);
    if (ext == ".pgm" && ch == 1) return write_pnm(path, image, 1);
    if (ext == ".ppm" && ch == 3) return write_pnm(path, image, 3);
    throw IoError("unsupported output format '" + ext + "' for a " + std::to_string(ch) + "-channel image");
}

void write_heatmap(const fs::path& path, const Matrix& map) {
    const double lo = map.minCoeff();
    const double hi = map.maxCoeff();
    Image img(Shape3{1, static_cast<int>(map.rows()), static_cast<int>(map.cols())});
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) img.at(0, y, x) = hi > lo ? (map(y, x) - lo) / (hi - lo) : 0.0;
    write_image(path, img);
}

}  // namespace ccswap
