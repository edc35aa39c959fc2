#pragma once

#include <cstdint>

#include "dkmo/dataset.hpp"

// Labelled synthetic datasets with known generative structure.
namespace dkmo::data {

// Isotropic Gaussian blobs in `dim` dimensions. Class centres sit on a
// circle in the first two coordinates, adjacent centres `separation` apart.
// Samples are dealt to classes round-robin.
struct BlobsParams {
    int classes = 3;
    Index samples = 300;
    double sigma = 0.3;
    double separation = 3.0;
    Index dim = 2;
};
Dataset blobs(const BlobsParams& params, std::uint64_t seed);

// Concentric circles in 2-D, class c at radius c + 1, radial noise `noise`.
struct RingsParams {
    int classes = 2;
    Index samples = 400;
    double noise = 0.1;
};
Dataset rings(const RingsParams& params, std::uint64_t seed);

// `views` feature views over classes = 2^bits. View v (mask m = v + 1)
// splits the classes into two groups by parity(c & m): group 0 is a
// Gaussian core of radius scale `core`, group 1 a ring of radius `radius`.
// Extra isotropic noise dimensions (`nuisance`) are appended to each view.
// No view alone determines the class; any two distinct masks do.
struct MultiviewParams {
    int classes = 4;
    int views = 3;
    Index samples = 400;
    double core = 0.3;
    double radius = 2.0;
    double noise = 0.15;
    Index nuisance = 0;
};
Dataset multiview(const MultiviewParams& params, std::uint64_t seed);
// Group of class c in view v.
int multiview_group(int c, int view);

}  // namespace dkmo::data
