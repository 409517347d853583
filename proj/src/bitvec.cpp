#include "canbnn/bitvec.hpp"

#include "canbnn/error.hpp"

namespace canbnn {

BitVector BitVector::from_string(std::string_view bits01) {
    BitVector v(bits01.size());
    for (std::size_t i = 0; i < bits01.size(); ++i) {
        const char c = bits01[i];
        if (c == '1')
            v.set(i, true);
        else if (c != '0')
            throw ConfigError("bit string may contain only '0' and '1'");
    }
    return v;
}

std::string BitVector::to_string() const {
    std::string s(n_bits_, '0');
    for (std::size_t i = 0; i < n_bits_; ++i)
        if (get(i)) s[i] = '1';
    return s;
}

}  // namespace canbnn
