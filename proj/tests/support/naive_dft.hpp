#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace heatcast::testsupport {

/// Direct O(N^2) DFT evaluated straight from the definition: content is the
/// top-most min(box_rows, rows) rows, row transform length = rows, column
/// transform length = max(box_cols, cols), symmetric column frequencies with
/// DC at cols/2, coefficients divided by the content cell count.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& box,
                                                   int box_rows, int box_cols, int rows,
                                                   int cols) {
    const int content_rows = std::min(box_rows, rows);
    const int row_off = box_rows - content_rows;
    const int len_cols = std::max(box_cols, cols);
    std::vector<std::complex<double>> out(size_t(rows) * cols);
    for (int fr = 0; fr < rows; ++fr) {
        for (int fc = 0; fc < cols; ++fc) {
            const int freq = fc - cols / 2;
            std::complex<double> acc = 0.0;
            for (int i = 0; i < content_rows; ++i) {
                for (int j = 0; j < box_cols; ++j) {
                    const double angle =
                        -2.0 * M_PI * (double(fr) * i / rows + double(freq) * j / len_cols);
                    acc += box[size_t(row_off + i) * box_cols + j] *
                           std::complex<double>(std::cos(angle), std::sin(angle));
                }
            }
            out[size_t(fr) * cols + fc] = acc / double(content_rows * box_cols);
        }
    }
    return out;
}

}  // namespace heatcast::testsupport
