#ifndef BIFOCUS_MODEL_IO_HPP
#define BIFOCUS_MODEL_IO_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "bifocus/model.hpp"

namespace bifocus {

/// JSON layout mirrors the type definitions; coefficient triangles are stored
/// row-major by total degree. Doubles round-trip bit-faithfully (shortest
/// decimal form). Unknown keys are rejected.
nlohmann::ordered_json model_to_json(const GlobalMapModel& gm);
GlobalMapModel model_from_json(const nlohmann::json& j);

nlohmann::ordered_json spectrum_to_json(const BiFocusSpectrum& spec);
BiFocusSpectrum spectrum_from_json(const nlohmann::json& j);

/// Atomic write: temp file in the same directory, then rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

void save_model(const std::filesystem::path& path, const GlobalMapModel& gm);
GlobalMapModel load_model(const std::filesystem::path& path);

void save_spectrum(const std::filesystem::path& path, const BiFocusSpectrum& spec);
BiFocusSpectrum load_spectrum(const std::filesystem::path& path);

} // namespace bifocus

#endif
