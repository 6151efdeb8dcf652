#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace slqi {

struct BarcodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyText : BarcodeError {
    using BarcodeError::BarcodeError;
};
struct UnsupportedChar : BarcodeError {
    using BarcodeError::BarcodeError;
};

namespace code128 {

inline constexpr int kStartB = 104;
inline constexpr int kStop = 106;

// Module widths per symbol value 0..106 (bar,space,...); data/start symbols
// are 6 elements / 11 modules, the stop pattern is 7 elements / 13 modules.
inline constexpr std::array<const char*, 107> kModuleTable = {
    "212222", "222122", "222221", "121223", "121322", "131222", "122213",
    "122312", "132212", "221213", "221312", "231212", "112232", "122132",
    "122231", "113222", "123122", "123221", "223211", "221132", "221231",
    "213212", "223112", "312131", "311222", "321122", "321221", "312212",
    "322112", "322211", "212123", "212321", "232121", "111323", "131123",
    "131321", "112313", "132113", "132311", "211313", "231113", "231311",
    "112133", "112331", "132131", "113123", "113321", "133121", "313121",
    "211331", "231131", "213113", "213311", "213131", "311123", "311321",
    "331121", "312113", "312311", "332111", "314111", "221411", "431111",
    "111224", "111422", "121124", "121421", "141122", "141221", "112214",
    "112412", "122114", "122411", "142112", "142211", "241211", "221114",
    "413111", "241112", "134111", "111242", "121142", "121241", "114212",
    "124112", "124211", "411212", "421112", "421211", "212141", "214121",
    "412121", "111143", "111341", "131141", "114113", "114311", "411113",
    "411311", "113141", "114131", "311141", "411131", "211412", "211214",
    "211232", "2331112"};

struct Encoding {
    std::vector<int> symbols;  // StartB, data values, checksum, Stop
    std::vector<int> widths;   // module widths, first element is a bar
    int checksum = 0;
    int total_modules = 0;
};

/// Encode ASCII text in subset B (chars 32..127). The checksum symbol is
/// (start value + sum of position-weighted data values) mod 103.
inline Encoding encode(std::string_view text) {
    if (text.empty()) throw EmptyText("Code 128 text is empty");
    Encoding enc;
    enc.symbols.push_back(kStartB);
    long sum = kStartB;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const unsigned char ch = static_cast<unsigned char>(text[i]);
        if (ch < 32 || ch > 127)
            throw UnsupportedChar("character outside Code 128 subset B");
        const int value = ch - 32;
        enc.symbols.push_back(value);
        sum += static_cast<long>(i + 1) * value;
    }
    enc.checksum = static_cast<int>(sum % 103);
    enc.symbols.push_back(enc.checksum);
    enc.symbols.push_back(kStop);
    for (int sym : enc.symbols)
        for (const char* p = kModuleTable[sym]; *p; ++p) {
            enc.widths.push_back(*p - '0');
            enc.total_modules += *p - '0';
        }
    return enc;
}

}  // namespace code128
}  // namespace slqi
