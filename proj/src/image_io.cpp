#include "salmonkit/image_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "salmonkit/version.hpp"

namespace salmon {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png)
            png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png)
            png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;     // after expansion/stripping: 1 or 3
    int bit_depth = 0;    // 8 or 16
    std::vector<std::uint8_t> rows; // packed, big-endian for 16 bit
};

DecodedPng decode_png(const std::filesystem::path& path, bool keep_16bit) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp)
        throw ImageIoError("cannot open for reading: " + path.string());

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png)
        throw ImageIoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info)
        throw ImageIoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png)))
        throw ImageIoError("failed to decode PNG: " + path.string());

    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);

    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int bit_depth = 0;
    int color_type = 0;
    png_get_IHDR(r.png, r.info, &width, &height, &bit_depth, &color_type, nullptr, nullptr,
                 nullptr);

    if (color_type == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS))
        png_set_tRNS_to_alpha(r.png);
    if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(r.png, r.info, PNG_INFO_tRNS))
        png_set_strip_alpha(r.png);
    if (bit_depth == 16 && !keep_16bit)
        png_set_strip_16(r.png);

    png_read_update_info(r.png, r.info);
    png_get_IHDR(r.png, r.info, &width, &height, &bit_depth, &color_type, nullptr, nullptr,
                 nullptr);

    int channels = png_get_channels(r.png, r.info);
    std::size_t rowbytes = png_get_rowbytes(r.png, r.info);

    DecodedPng out;
    out.width = static_cast<int>(width);
    out.height = static_cast<int>(height);
    out.channels = channels;
    out.bit_depth = bit_depth;
    out.rows.resize(rowbytes * height);

    std::vector<png_bytep> row_ptrs(height);
    for (png_uint_32 y = 0; y < height; ++y)
        row_ptrs[y] = out.rows.data() + y * rowbytes;
    png_read_image(r.png, row_ptrs.data());
    png_read_end(r.png, nullptr);
    return out;
}

void set_software_text(png_structp png, png_infop info, const std::string& config_tag) {
    static thread_local std::string text_value;
    text_value = std::string(kToolkitName) + " " + std::string(kToolkitVersion);
    if (!config_tag.empty())
        text_value += " config=" + config_tag;
    png_text txt{};
    txt.compression = PNG_TEXT_COMPRESSION_NONE;
    txt.key = const_cast<char*>("Software");
    txt.text = const_cast<char*>(text_value.c_str());
    txt.text_length = text_value.size();
    png_set_text(png, info, &txt, 1);
}

void encode_png(const std::filesystem::path& path, int width, int height, int channels,
                int bit_depth, const std::vector<std::uint8_t>& packed,
                const std::string& config_tag) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        FilePtr fp(std::fopen(tmp.string().c_str(), "wb"));
        if (!fp)
            throw ImageIoError("cannot open for writing: " + tmp.string());

        PngWriter w;
        w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!w.png)
            throw ImageIoError("png_create_write_struct failed");
        w.info = png_create_info_struct(w.png);
        if (!w.info)
            throw ImageIoError("png_create_info_struct failed");
        if (setjmp(png_jmpbuf(w.png)))
            throw ImageIoError("failed to encode PNG: " + path.string());

        png_init_io(w.png, fp.get());
        png_set_compression_level(w.png, 1);
        int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
        png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width),
                     static_cast<png_uint_32>(height), bit_depth, color_type,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        set_software_text(w.png, w.info, config_tag);
        png_write_info(w.png, w.info);

        std::size_t rowbytes =
            static_cast<std::size_t>(width) * channels * (bit_depth == 16 ? 2 : 1);
        std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(height));
        for (int y = 0; y < height; ++y)
            row_ptrs[static_cast<std::size_t>(y)] =
                const_cast<png_bytep>(packed.data() + static_cast<std::size_t>(y) * rowbytes);
        png_write_image(w.png, row_ptrs.data());
        png_write_end(w.png, nullptr);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

ImageU8 read_image_u8(const std::filesystem::path& path) {
    DecodedPng d = decode_png(path, /*keep_16bit=*/false);
    if (d.channels != 1 && d.channels != 3)
        throw ImageIoError("unsupported channel count in " + path.string());
    ImageU8 img;
    img.width = d.width;
    img.height = d.height;
    img.channels = d.channels;
    img.pixels = std::move(d.rows);
    return img;
}

MaskRaster read_mask_png(const std::filesystem::path& path) {
    DecodedPng d = decode_png(path, /*keep_16bit=*/true);
    if (d.channels != 1)
        throw ImageIoError("mask must be single-channel: " + path.string());
    MaskRaster mask(d.width, d.height, 0);
    std::size_t bpp = d.bit_depth == 16 ? 2 : 1;
    for (int y = 0; y < d.height; ++y) {
        const std::uint8_t* src = d.rows.data() + static_cast<std::size_t>(y) * d.width * bpp;
        auto row = mask.row(y);
        for (int x = 0; x < d.width; ++x) {
            bool fg = bpp == 2 ? (src[2 * x] != 0 || src[2 * x + 1] != 0) : (src[x] != 0);
            row[static_cast<std::size_t>(x)] = fg ? 1 : 0;
        }
    }
    return mask;
}

MapRaster read_gray_map_png(const std::filesystem::path& path) {
    DecodedPng d = decode_png(path, /*keep_16bit=*/true);
    if (d.channels != 1)
        throw ImageIoError("gray map must be single-channel: " + path.string());
    MapRaster map(d.width, d.height, 0.0);
    if (d.bit_depth == 16) {
        for (int y = 0; y < d.height; ++y) {
            const std::uint8_t* src = d.rows.data() + static_cast<std::size_t>(y) * d.width * 2;
            auto row = map.row(y);
            for (int x = 0; x < d.width; ++x) {
                unsigned v = (static_cast<unsigned>(src[2 * x]) << 8) | src[2 * x + 1];
                row[static_cast<std::size_t>(x)] = v / 65535.0;
            }
        }
    } else {
        for (int y = 0; y < d.height; ++y) {
            const std::uint8_t* src = d.rows.data() + static_cast<std::size_t>(y) * d.width;
            auto row = map.row(y);
            for (int x = 0; x < d.width; ++x)
                row[static_cast<std::size_t>(x)] = src[x] / 255.0;
        }
    }
    return map;
}

void write_mask_png(const std::filesystem::path& path, const MaskRaster& mask,
                    const std::string& config_tag) {
    std::vector<std::uint8_t> packed(mask.pixel_count());
    auto px = mask.pixels();
    for (std::size_t i = 0; i < px.size(); ++i)
        packed[i] = px[i] ? 255 : 0;
    encode_png(path, mask.width(), mask.height(), 1, 8, packed, config_tag);
}

void write_gray16_png(const std::filesystem::path& path, const MapRaster& map,
                      const std::string& config_tag) {
    std::vector<std::uint8_t> packed(map.pixel_count() * 2);
    auto px = map.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        double v = px[i];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        auto q = static_cast<unsigned>(std::lround(v * 65535.0));
        packed[2 * i] = static_cast<std::uint8_t>(q >> 8);
        packed[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    encode_png(path, map.width(), map.height(), 1, 16, packed, config_tag);
}

void write_rgb8_png(const std::filesystem::path& path, const ImageU8& image,
                    const std::string& config_tag) {
    if (image.channels != 3)
        throw ImageIoError("write_rgb8_png expects a 3-channel image");
    encode_png(path, image.width, image.height, 3, 8, image.pixels, config_tag);
}

} // namespace salmon
