#include "scida/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "scida/errors.hpp"

namespace scida {

void write_png(const std::string& path, const Vec& pixels, int channels, int side) {
    if (pixels.size() != channels * side * side)
        throw ShapeError("write_png: pixel buffer size mismatch");
    cv::Mat img(side, side, channels == 3 ? CV_8UC3 : CV_8UC1);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            if (channels == 3) {
                auto& px = img.at<cv::Vec3b>(y, x);
                // OpenCV stores BGR.
                for (int c = 0; c < 3; ++c) {
                    const double v = pixels[c * side * side + y * side + x];
                    px[2 - c] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
                }
            } else {
                const double v = pixels[y * side + x];
                img.at<unsigned char>(y, x) =
                    static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
        }
    }
    if (!cv::imwrite(path, img)) throw LoadError("write_png: cannot write " + path);
}

Vec read_image(const std::string& path, int channels, int side) {
    cv::Mat img = cv::imread(path, channels == 3 ? cv::IMREAD_COLOR : cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw LoadError("read_image: cannot read " + path);
    if (img.rows != side || img.cols != side)
        cv::resize(img, img, cv::Size(side, side), 0, 0, cv::INTER_AREA);
    Vec pixels(channels * side * side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            if (channels == 3) {
                const auto& px = img.at<cv::Vec3b>(y, x);
                for (int c = 0; c < 3; ++c)
                    pixels[c * side * side + y * side + x] = px[2 - c] / 255.0;
            } else {
                pixels[y * side + x] = img.at<unsigned char>(y, x) / 255.0;
            }
        }
    }
    return pixels;
}

}  // namespace scida
