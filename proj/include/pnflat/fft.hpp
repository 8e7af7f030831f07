#pragma once

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <vector>

namespace pnflat {

using cplx = std::complex<double>;

// Row-major n1 x n2 transforms. Forward uses e^{-i k.x}; inverse uses e^{+i k.x}
// and divides by n1*n2, so inverse(forward(f)) == f.
class FFT2 {
public:
    FFT2(int n1, int n2) : n1_(n1), n2_(n2), nh_(n2 / 2 + 1) {
        const std::size_t nr = std::size_t(n1) * n2, nc = std::size_t(n1) * nh_, nf = nr;
        real_ = fftw_alloc_real(nr);
        half_ = fftw_alloc_complex(nc);
        full_ = fftw_alloc_complex(nf);
        r2c_ = fftw_plan_dft_r2c_2d(n1, n2, real_, half_, FFTW_ESTIMATE);
        c2r_ = fftw_plan_dft_c2r_2d(n1, n2, half_, real_, FFTW_ESTIMATE);
        fwd_ = fftw_plan_dft_2d(n1, n2, full_, full_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(n1, n2, full_, full_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    FFT2(const FFT2&) = delete;
    FFT2& operator=(const FFT2&) = delete;
    ~FFT2() {
        fftw_destroy_plan(r2c_);
        fftw_destroy_plan(c2r_);
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(half_);
        fftw_free(full_);
    }

    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int nhalf() const { return nh_; }

    // Half spectrum, n1 x (n2/2+1).
    void forward(const std::vector<double>& in, std::vector<cplx>& out) {
        std::memcpy(real_, in.data(), sizeof(double) * in.size());
        fftw_execute(r2c_);
        out.resize(std::size_t(n1_) * nh_);
        std::memcpy(static_cast<void*>(out.data()), half_, sizeof(fftw_complex) * out.size());
    }

    void inverse(const std::vector<cplx>& in, std::vector<double>& out) {
        std::memcpy(half_, in.data(), sizeof(fftw_complex) * in.size());
        fftw_execute(c2r_);
        const std::size_t n = std::size_t(n1_) * n2_;
        out.resize(n);
        const double s = 1.0 / double(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = real_[i] * s;
    }

    void forward_full(const std::vector<cplx>& in, std::vector<cplx>& out) {
        std::memcpy(full_, in.data(), sizeof(fftw_complex) * in.size());
        fftw_execute(fwd_);
        out.resize(in.size());
        std::memcpy(static_cast<void*>(out.data()), full_, sizeof(fftw_complex) * out.size());
    }

    void inverse_full(const std::vector<cplx>& in, std::vector<cplx>& out) {
        std::memcpy(full_, in.data(), sizeof(fftw_complex) * in.size());
        fftw_execute(bwd_);
        out.resize(in.size());
        const double s = 1.0 / double(in.size());
        for (std::size_t i = 0; i < in.size(); ++i)
            out[i] = cplx(full_[i][0] * s, full_[i][1] * s);
    }

private:
    int n1_, n2_, nh_;
    double* real_;
    fftw_complex* half_;
    fftw_complex* full_;
    fftw_plan r2c_, c2r_, fwd_, bwd_;
};

// Signed mode index for position i on an n-point transform axis.
inline int mode_index(int i, int n) { return i <= n / 2 ? i : i - n; }

}  // namespace pnflat
