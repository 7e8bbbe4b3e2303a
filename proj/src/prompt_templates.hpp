#pragma once

#include <string_view>

namespace capeval::detail {

extern const std::string_view kVanillaTemplate;
extern const std::string_view kReferenceTemplate;
extern const std::string_view kDescriptionStep1Template;
extern const std::string_view kVisceStep1Template;
extern const std::string_view kStep2Template;

}  // namespace capeval::detail
