#pragma once

#include <filesystem>
#include <string>

#include "schemasift/schema.h"

namespace schemasift::testing {

inline std::filesystem::path test_data_dir() { return SCHEMASIFT_TEST_DATA_DIR; }

/// Students, Enrollments, Courses and Departments with declared keys.
inline DatabaseSchema university_schema() {
    return load_schema(test_data_dir() / "fixtures" / "university.json", SchemaFormat::native);
}

/// A scratch directory under the build tree, emptied on creation.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("schemasift_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace schemasift::testing
