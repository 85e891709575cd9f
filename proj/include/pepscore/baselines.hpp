#pragma once

#include "pepscore/spectrum.hpp"

namespace pepscore {

// Similarity index over m/z bins of the given width:
//   I = sum_i sqrt(y^o_i y^t_i) / (sqrt(sum y^o) sqrt(sum y^t)),
// in [0, 1] by Cauchy-Schwarz. Throws when either spectrum carries no
// intensity.
double similarity_index(const Spectrum& observed, const Spectrum& theoretical,
                        double binwidth = 2.0);

// SEQUEST-style cross-correlation score: the spectra are discretized over
// their shared m/z span (padded by 75 bins each side) and
//   Xcorr = R_0 - mean(R_i, i = -75..75)
// with R_i the dot product at lag i. Reimplemented for synthetic benchmarks;
// the original applies its own internal preprocessing, this one scores the
// spectra as given.
double xcorr(const Spectrum& observed, const Spectrum& theoretical,
             double binwidth = 1.0);

}  // namespace pepscore
