#include "ctmar/containers.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace ctmar {

namespace {

constexpr char kSinoMagic[] = "SINO1\n";
constexpr char kMaskMagic[] = "MASK1\n";
constexpr char kImgMagic[] = "IMG1\n";

nlohmann::json make_header(int rows, int cols, const std::string& unit, std::uint64_t geom_hash,
                           double pitch_mm) {
    return {{"dims", {rows, cols}},
            {"layout", "angle-major"},
            {"unit", unit},
            {"geom", to_hex(geom_hash)},
            {"pitch_mm", pitch_mm}};
}

void write_container(const std::string& path, const char* magic, size_t magic_len,
                     const nlohmann::json& header, const void* payload, size_t payload_bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    f.write(magic, static_cast<std::streamsize>(magic_len));
    std::string hdr = header.dump();
    f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    f.put('\n');
    f.write(static_cast<const char*>(payload), static_cast<std::streamsize>(payload_bytes));
    if (!f) throw io_error("failed writing '" + path + "'");
}

struct ContainerIn {
    nlohmann::json header;
    std::string payload;
    int rows = 0, cols = 0;
};

ContainerIn read_container(const std::string& path, const char* magic, size_t magic_len,
                           size_t elem_bytes) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for reading");
    std::string buf(magic_len, '\0');
    f.read(buf.data(), static_cast<std::streamsize>(magic_len));
    if (!f || std::memcmp(buf.data(), magic, magic_len) != 0)
        throw validation_error("'" + path + "': bad magic");
    ContainerIn out;
    std::string hdr;
    std::getline(f, hdr);
    if (!f) throw validation_error("'" + path + "': missing header line");
    try {
        out.header = nlohmann::json::parse(hdr);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("'" + path + "': bad header JSON: " + e.what());
    }
    out.rows = out.header.at("dims").at(0).get<int>();
    out.cols = out.header.at("dims").at(1).get<int>();
    if (out.rows < 1 || out.cols < 1) throw validation_error("'" + path + "': bad dims");
    if (out.header.at("layout").get<std::string>() != "angle-major")
        throw validation_error("'" + path + "': unknown layout");
    size_t expect = static_cast<size_t>(out.rows) * static_cast<size_t>(out.cols) * elem_bytes;
    out.payload.resize(expect);
    f.read(out.payload.data(), static_cast<std::streamsize>(expect));
    if (static_cast<size_t>(f.gcount()) != expect)
        throw validation_error("'" + path + "': payload size mismatch");
    char extra;
    if (f.read(&extra, 1)) throw validation_error("'" + path + "': trailing bytes after payload");
    return out;
}

void check_geom(const std::string& path, const nlohmann::json& header, const ScanGeometry* expect) {
    if (!expect) return;
    if (header.at("geom").get<std::string>() != to_hex(expect->hash()))
        throw validation_error("'" + path + "': geometry hash mismatch");
}

}  // namespace

void write_sinogram(const std::string& path, const Sinogram& sino) {
    nlohmann::json hdr = make_header(sino.values.rows, sino.values.cols, sino_unit_name(sino.unit),
                                     sino.geom.hash(), sino.geom.detector_pitch_mm());
    write_container(path, kSinoMagic, 6, hdr, sino.values.v.data(), sino.values.v.size() * sizeof(float));
}

Sinogram read_sinogram(const std::string& path, const ScanGeometry* expect_geom) {
    ContainerIn in = read_container(path, kSinoMagic, 6, sizeof(float));
    check_geom(path, in.header, expect_geom);
    Sinogram s;
    s.unit = sino_unit_from_name(in.header.at("unit").get<std::string>());
    if (expect_geom) s.geom = *expect_geom;
    s.values = GridF(in.rows, in.cols);
    std::memcpy(s.values.v.data(), in.payload.data(), in.payload.size());
    if (!expect_geom) {
        // minimal standalone geometry; angles/detectors from dims
        s.geom.n_angles = in.rows;
        s.geom.n_detectors = in.cols;
        s.geom.fov_mm = in.header.at("pitch_mm").get<double>() * in.cols;
    }
    return s;
}

void write_mask(const std::string& path, const SinogramMask& mask, const ScanGeometry& geom) {
    nlohmann::json hdr = make_header(mask.values.rows, mask.values.cols, "mask", geom.hash(),
                                     geom.detector_pitch_mm());
    write_container(path, kMaskMagic, 6, hdr, mask.values.v.data(), mask.values.v.size());
}

SinogramMask read_mask(const std::string& path, const ScanGeometry* expect_geom) {
    ContainerIn in = read_container(path, kMaskMagic, 6, 1);
    check_geom(path, in.header, expect_geom);
    if (in.header.at("unit").get<std::string>() != "mask")
        throw validation_error("'" + path + "': unknown unit tag");
    SinogramMask m;
    m.values = GridB(in.rows, in.cols);
    for (size_t i = 0; i < m.values.v.size(); ++i) {
        char c = in.payload[i];
        if (c != 0 && c != 1) throw validation_error("'" + path + "': mask payload must be 0/1");
        m.values.v[i] = static_cast<std::uint8_t>(c);
    }
    return m;
}

void write_image(const std::string& path, const Image& img) {
    nlohmann::json hdr = make_header(img.values.rows, img.values.cols, "mu_cm_inv", 0, img.pixel_pitch_mm);
    hdr["provenance"] = img.provenance;
    write_container(path, kImgMagic, 5, hdr, img.values.v.data(), img.values.v.size() * sizeof(float));
}

Image read_image(const std::string& path) {
    ContainerIn in = read_container(path, kImgMagic, 5, sizeof(float));
    if (in.header.at("unit").get<std::string>() != "mu_cm_inv")
        throw validation_error("'" + path + "': unknown unit tag");
    Image img;
    img.pixel_pitch_mm = in.header.at("pitch_mm").get<double>();
    img.provenance = in.header.value("provenance", "reference");
    img.values = GridF(in.rows, in.cols);
    std::memcpy(img.values.v.data(), in.payload.data(), in.payload.size());
    return img;
}

void write_image_mask(const std::string& path, const GridB& mask, double pixel_pitch_mm) {
    nlohmann::json hdr = make_header(mask.rows, mask.cols, "mask", 0, pixel_pitch_mm);
    write_container(path, kMaskMagic, 6, hdr, mask.v.data(), mask.v.size());
}

GridB read_image_mask(const std::string& path, double* pixel_pitch_mm) {
    ContainerIn in = read_container(path, kMaskMagic, 6, 1);
    if (pixel_pitch_mm) *pixel_pitch_mm = in.header.at("pitch_mm").get<double>();
    GridB m(in.rows, in.cols);
    for (size_t i = 0; i < m.v.size(); ++i) {
        char c = in.payload[i];
        if (c != 0 && c != 1) throw validation_error("'" + path + "': mask payload must be 0/1");
        m.v[i] = static_cast<std::uint8_t>(c);
    }
    return m;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for reading");
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw io_error("failed writing '" + path + "'");
}

namespace {

// minimal 8-bit grayscale PNG: IHDR + one zlib-compressed IDAT + IEND
void write_png_gray(const std::string& path, int rows, int cols, const std::vector<unsigned char>& pixels) {
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<size_t>(rows) * (static_cast<size_t>(cols) + 1));
    for (int r = 0; r < rows; ++r) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), pixels.begin() + static_cast<std::ptrdiff_t>(r) * cols,
                   pixels.begin() + static_cast<std::ptrdiff_t>(r + 1) * cols);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw io_error("png: zlib compression failed");
    comp.resize(comp_len);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
        f.write(reinterpret_cast<char*>(b), 4);
    };
    auto put_chunk = [&](const char type[4], const unsigned char* data, size_t len) {
        put_u32(static_cast<std::uint32_t>(len));
        f.write(type, 4);
        if (len) f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(len));
        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
        if (len) crc = crc32(crc, data, static_cast<uInt>(len));
        put_u32(static_cast<std::uint32_t>(crc));
    };
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);
    unsigned char ihdr[13];
    std::uint32_t w = static_cast<std::uint32_t>(cols), h = static_cast<std::uint32_t>(rows);
    ihdr[0] = static_cast<unsigned char>(w >> 24);
    ihdr[1] = static_cast<unsigned char>(w >> 16);
    ihdr[2] = static_cast<unsigned char>(w >> 8);
    ihdr[3] = static_cast<unsigned char>(w);
    ihdr[4] = static_cast<unsigned char>(h >> 24);
    ihdr[5] = static_cast<unsigned char>(h >> 16);
    ihdr[6] = static_cast<unsigned char>(h >> 8);
    ihdr[7] = static_cast<unsigned char>(h);
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 0;   // grayscale
    ihdr[10] = 0;  // compression
    ihdr[11] = 0;  // filter
    ihdr[12] = 0;  // no interlace
    put_chunk("IHDR", ihdr, 13);
    put_chunk("IDAT", comp.data(), comp.size());
    put_chunk("IEND", nullptr, 0);
    if (!f) throw io_error("failed writing '" + path + "'");
}

void write_pgm_gray(const std::string& path, int rows, int cols, const std::vector<unsigned char>& pixels) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    f << "P5\n" << cols << " " << rows << "\n255\n";
    f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!f) throw io_error("failed writing '" + path + "'");
}

}  // namespace

void render_gray(const std::string& path, const GridF& values, double window_lo, double window_hi) {
    if (!(window_lo < window_hi)) throw validation_error("render: window_lo must be < window_hi");
    std::vector<unsigned char> pixels(values.v.size());
    const double span = window_hi - window_lo;
    for (size_t i = 0; i < values.v.size(); ++i) {
        double v = (static_cast<double>(values.v[i]) - window_lo) / span;
        v = std::min(1.0, std::max(0.0, v));
        double g = std::floor(v * 255.0 + 0.5);  // round half up
        pixels[i] = static_cast<unsigned char>(std::min(255.0, g));
    }
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0)
        write_pgm_gray(path, values.rows, values.cols, pixels);
    else if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".png") == 0)
        write_png_gray(path, values.rows, values.cols, pixels);
    else
        throw validation_error("render: unsupported extension (use .png or .pgm): " + path);
}

}  // namespace ctmar
