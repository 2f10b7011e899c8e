#include "geossl/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

#include "geossl/errors.hpp"

namespace geossl {

namespace {

ImageSample from_mat_rgb(const cv::Mat& rgb) {
  ImageSample out;
  out.height = rgb.rows;
  out.width = rgb.cols;
  out.pixels.resize(static_cast<std::size_t>(rgb.rows) * rgb.cols * 3);
  if (rgb.isContinuous()) {
    std::memcpy(out.pixels.data(), rgb.data, out.pixels.size());
  } else {
    for (int y = 0; y < rgb.rows; ++y)
      std::memcpy(out.pixels.data() + static_cast<std::size_t>(y) * rgb.cols * 3,
                  rgb.ptr(y), static_cast<std::size_t>(rgb.cols) * 3);
  }
  return out;
}

std::vector<std::filesystem::path>* g_access_log = nullptr;

}  // namespace

std::vector<std::filesystem::path>* set_image_access_log(std::vector<std::filesystem::path>* sink) {
  auto* previous = g_access_log;
  g_access_log = sink;
  return previous;
}

ImageSample load_image(const std::filesystem::path& path) {
  if (g_access_log) g_access_log->push_back(path);
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) {
    raise(ErrorCode::DecodeError, "cannot decode image: " + path.string());
  }
  cv::Mat rgb;
  if (raw.channels() == 1) {
    cv::cvtColor(raw, rgb, cv::COLOR_GRAY2RGB);
  } else if (raw.channels() == 3) {
    cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
  } else if (raw.channels() == 4) {
    cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB);
  } else {
    raise(ErrorCode::DecodeError, "unsupported channel count in " + path.string());
  }
  if (rgb.depth() != CV_8U) {
    // 16-bit TIFFs and friends get scaled down to 8 bits.
    double maxv = rgb.depth() == CV_16U ? 65535.0 : 255.0;
    rgb.convertTo(rgb, CV_8U, 255.0 / maxv);
  }
  ImageSample out = from_mat_rgb(rgb);
  out.source_path = path;
  return out;
}

void save_png(const ImageSample& image, const std::filesystem::path& path) {
  cv::Mat rgb(image.height, image.width, CV_8UC3,
              const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<unsigned char> buf;
  std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 3};
  if (!cv::imencode(".png", bgr, buf, params)) {
    raise(ErrorCode::IoError, "PNG encode failed for " + path.string());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) raise(ErrorCode::IoError, "cannot open " + tmp.string());
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) raise(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) raise(ErrorCode::IoError, "rename failed for " + path.string() + ": " + ec.message());
}

Tensor image_to_chw(const ImageSample& image) {
  Tensor t({3, image.height, image.width});
  const std::int64_t hw = static_cast<std::int64_t>(image.height) * image.width;
  for (std::int64_t i = 0; i < hw; ++i) {
    for (int c = 0; c < 3; ++c) {
      t.data[static_cast<std::size_t>(c * hw + i)] =
          static_cast<float>(image.pixels[static_cast<std::size_t>(i * 3 + c)]) / 255.0f;
    }
  }
  return t;
}

ImageSample chw_to_image(const Tensor& chw) {
  if (chw.dims.size() != 3 || chw.dims[0] != 3) {
    raise(ErrorCode::InvalidArgument, "chw_to_image expects [3,H,W], got " + chw.shape_str());
  }
  ImageSample out;
  out.height = static_cast<int>(chw.dims[1]);
  out.width = static_cast<int>(chw.dims[2]);
  out.pixels.resize(static_cast<std::size_t>(out.height) * out.width * 3);
  const std::int64_t hw = static_cast<std::int64_t>(out.height) * out.width;
  for (std::int64_t i = 0; i < hw; ++i) {
    for (int c = 0; c < 3; ++c) {
      float v = chw.data[static_cast<std::size_t>(c * hw + i)] * 255.0f;
      v = std::min(255.0f, std::max(0.0f, std::round(v)));
      out.pixels[static_cast<std::size_t>(i * 3 + c)] = static_cast<std::uint8_t>(v);
    }
  }
  return out;
}

}  // namespace geossl
