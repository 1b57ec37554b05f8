// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cosal/data/loader.hpp"
#include "cosal/harness/checkpoint.hpp"
#include "cosal/harness/train.hpp"
#include "cosal/network/network.hpp"

namespace cosal::harness {

/// Single-image inference: RGB in, 8-bit grayscale saliency map out at the
/// input's original resolution. The signature is the depth-free contract:
/// there is no way to hand this path a depth map.
inline void infer(const Checkpoint& ck, const std::filesystem::path& image_path,
                  const std::filesystem::path& out_path) {
  cv::Mat bgr = cv::imread(image_path.string(), cv::IMREAD_COLOR);
  check<IngestionError>(!bgr.empty(), "infer: cannot read image: ", image_path.string());
  const cv::Size original = bgr.size();
  const auto side = static_cast<int>(ck.config.input_side);
  cv::Mat resized = data::detail::resize_to(bgr, cv::Size(side, side), cv::INTER_LINEAR);

  std::mt19937_64 rng(static_cast<std::uint64_t>(ck.config.seed));
  SaliencyNetwork<float> net(rng, ck.config.network_config());
  ck.apply_to(net);
  net.train(false);

  Tensor<float> image(Shape{1, 3, side, side});
  const std::int64_t plane = static_cast<std::int64_t>(side) * side;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const auto& px = resized.at<cv::Vec3b>(y, x);
      const std::int64_t i = static_cast<std::int64_t>(y) * side + x;
      image[0 * plane + i] = px[2] / 255.0f;
      image[1 * plane + i] = px[1] / 255.0f;
      image[2 * plane + i] = px[0] / 255.0f;
    }
  }

  Tensor<float> pred;
  {
    NoGradGuard ng;
    auto out = net.forward(Variable<float>(std::move(image), /*requires_grad=*/false));
    pred = out.s_final.value();
  }
  check<NumericError>(pred.all_finite(), "infer: prediction contains non-finite values");

  cv::Mat map(side, side, CV_32FC1);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      map.at<float>(y, x) = std::min(1.0f, std::max(0.0f, pred.at(0, 0, y, x)));
  cv::Mat full = data::detail::resize_to(map, original, cv::INTER_LINEAR);
  cv::Mat out8;
  full.convertTo(out8, CV_8U, 255.0);
  check<IngestionError>(cv::imwrite(out_path.string(), out8),
                        "infer: cannot write output map: ", out_path.string());
}

}  // namespace cosal::harness
