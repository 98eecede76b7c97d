// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "agridet/dataio.hpp"
#include "agridet/image.hpp"

namespace testsupport {

/// Fresh directory under the system temp root; never reused within a run.
std::filesystem::path unique_temp_dir(const std::string& tag);

/// Deterministic synthetic image: smooth gradients plus a few rectangular
/// blocks, all values in [0,1].
agridet::ImageBuffer make_test_image(int width, int height, int channels, std::uint64_t seed);

/// Write the bundled two-image fixture dataset (paired .ppm/.xml) into dir
/// and return its manifest. Deterministic content.
agridet::DatasetManifest make_fixture_dataset(const std::filesystem::path& dir);

std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace testsupport
