//! Thin safe wrappers over the system LAPACK (OpenBLAS).
//!
//! All matrices cross this boundary as flat column-major buffers with
//! 32-bit dimensions, matching the Fortran calling convention. Callers in
//! [`crate::spectral`] own the layout conversions.

use num_complex::Complex64;
use std::ffi::c_void;
use std::os::raw::c_char;

use crate::error::Error;

extern "C" {
    fn dsyevd_(
        jobz: *const c_char,
        uplo: *const c_char,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn zheevd_(
        jobz: *const c_char,
        uplo: *const c_char,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        lrwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn dsytrd_(
        uplo: *const c_char,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        d: *mut f64,
        e: *mut f64,
        tau: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn dsterf_(n: *const i32, d: *mut f64, e: *mut f64, info: *mut i32);
    fn dstemr_(
        jobz: *const c_char,
        range: *const c_char,
        n: *const i32,
        d: *mut f64,
        e: *mut f64,
        vl: *const f64,
        vu: *const f64,
        il: *const i32,
        iu: *const i32,
        m: *mut i32,
        w: *mut f64,
        z: *mut f64,
        ldz: *const i32,
        nzc: *const i32,
        isuppz: *mut i32,
        tryrac: *mut i32,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
    fn dormtr_(
        side: *const c_char,
        uplo: *const c_char,
        trans: *const c_char,
        m: *const i32,
        n: *const i32,
        a: *const f64,
        lda: *const i32,
        tau: *const f64,
        c: *mut f64,
        ldc: *const i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
    fn zgees_(
        jobvs: *const c_char,
        sort: *const c_char,
        select: *const c_void,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        sdim: *mut i32,
        w: *mut Complex64,
        vs: *mut Complex64,
        ldvs: *const i32,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        bwork: *mut i32,
        info: *mut i32,
    );
    fn openblas_set_num_threads(n: i32);
}

/// Limit the BLAS thread pool (used by the CLI `--threads` flag).
pub fn set_blas_threads(n: usize) {
    unsafe { openblas_set_num_threads(n.max(1) as i32) }
}

fn check(routine: &'static str, info: i32) -> Result<(), Error> {
    if info == 0 {
        Ok(())
    } else {
        Err(Error::Lapack { routine, info })
    }
}

/// Full eigendecomposition of a real symmetric matrix (column-major, n×n).
///
/// Returns ascending eigenvalues and the eigenvector matrix in column-major
/// order (column k belongs to eigenvalue k). Uses `dsyevd`.
pub fn sym_eig_full(mut a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>), Error> {
    assert_eq!(a.len(), n * n);
    let ni = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let (jobz, uplo) = (b'V' as c_char, b'L' as c_char);

    let mut work_q = [0.0f64];
    let mut iwork_q = [0i32];
    let m1 = -1i32;
    unsafe {
        dsyevd_(
            &jobz, &uplo, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), work_q.as_mut_ptr(), &m1,
            iwork_q.as_mut_ptr(), &m1, &mut info,
        );
    }
    check("dsyevd(query)", info)?;
    let lwork = work_q[0] as i32;
    let liwork = iwork_q[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        dsyevd_(
            &jobz, &uplo, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    check("dsyevd", info)?;
    Ok((w, a))
}

/// All eigenvalues (ascending) of a real symmetric matrix; no vectors.
pub fn sym_eig_values(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>, Error> {
    assert_eq!(a.len(), n * n);
    let ni = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let (jobz, uplo) = (b'N' as c_char, b'L' as c_char);
    let mut work_q = [0.0f64];
    let mut iwork_q = [0i32];
    let m1 = -1i32;
    unsafe {
        dsyevd_(
            &jobz, &uplo, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), work_q.as_mut_ptr(), &m1,
            iwork_q.as_mut_ptr(), &m1, &mut info,
        );
    }
    check("dsyevd(query)", info)?;
    let lwork = work_q[0] as i32;
    let liwork = iwork_q[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        dsyevd_(
            &jobz, &uplo, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    check("dsyevd", info)?;
    Ok(w)
}

/// Output of [`sym_eig_window`]: the full spectrum plus eigenvectors for the
/// eigenvalues inside the requested window.
pub struct WindowEig {
    /// All n eigenvalues, ascending.
    pub all_values: Vec<f64>,
    /// Eigenvalues inside the window (a contiguous slice of `all_values`).
    pub window_values: Vec<f64>,
    /// Index of the first window eigenvalue within the full spectrum.
    pub first_index: usize,
    /// Eigenvectors for the window, column-major n×m.
    pub vectors: Vec<f64>,
}

/// Eigenvalues of the whole spectrum plus eigenvectors restricted to
/// `[lo, hi]`, for a real symmetric matrix (column-major, n×n).
///
/// Pipeline: `dsytrd` (tridiagonalization, done once) → `dsterf` (all
/// eigenvalues) → `dstemr` (tridiagonal eigenvectors for the window, by
/// index so the allocation is exact) → `dormtr` (back-transformation).
/// This keeps memory at O(n²) + O(n·m) instead of the O(n²) eigenvector
/// matrix a full decomposition would allocate.
pub fn sym_eig_window(mut a: Vec<f64>, n: usize, lo: f64, hi: f64) -> Result<WindowEig, Error> {
    assert_eq!(a.len(), n * n);
    assert!(lo <= hi);
    let ni = n as i32;
    let uplo = b'L' as c_char;
    let mut info = 0i32;
    let m1 = -1i32;

    // Tridiagonalize A = Q T Q^T; reflectors stay packed in `a`/`tau`.
    // `e` is sized n (not n-1): dstemr uses the last slot as workspace.
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    let mut tau = vec![0.0f64; n.saturating_sub(1)];
    let mut work_q = [0.0f64];
    unsafe {
        dsytrd_(
            &uplo, &ni, a.as_mut_ptr(), &ni, d.as_mut_ptr(), e.as_mut_ptr(), tau.as_mut_ptr(),
            work_q.as_mut_ptr(), &m1, &mut info,
        );
    }
    check("dsytrd(query)", info)?;
    let lwork = work_q[0] as i32;
    let mut work = vec![0.0f64; lwork as usize];
    unsafe {
        dsytrd_(
            &uplo, &ni, a.as_mut_ptr(), &ni, d.as_mut_ptr(), e.as_mut_ptr(), tau.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, &mut info,
        );
    }
    check("dsytrd", info)?;

    // Full spectrum from a scratch copy of (d, e).
    let mut all_values = d.clone();
    let mut e_scratch = e[..n.saturating_sub(1)].to_vec();
    unsafe {
        dsterf_(&ni, all_values.as_mut_ptr(), e_scratch.as_mut_ptr(), &mut info);
    }
    check("dsterf", info)?;

    // Window membership by index keeps the dstemr allocation exact.
    let first_index = all_values.partition_point(|&v| v < lo);
    let end_index = all_values.partition_point(|&v| v <= hi);
    let m_count = end_index - first_index;
    if m_count == 0 {
        return Ok(WindowEig {
            all_values,
            window_values: Vec::new(),
            first_index,
            vectors: Vec::new(),
        });
    }

    let il = (first_index + 1) as i32; // 1-based
    let iu = end_index as i32;
    let mut m_out = 0i32;
    let mut w = vec![0.0f64; n];
    let mut z = vec![0.0f64; n * m_count];
    let nzc = m_count as i32;
    let mut isuppz = vec![0i32; 2 * m_count];
    let mut tryrac = 1i32;
    let (jobz, range) = (b'V' as c_char, b'I' as c_char);
    let (vl, vu) = (0.0f64, 0.0f64); // unused with RANGE='I'
    let mut e_stemr = e.clone();
    let mut d_stemr = d.clone();
    let mut work_q = [0.0f64];
    let mut iwork_q = [0i32];
    unsafe {
        dstemr_(
            &jobz, &range, &ni, d_stemr.as_mut_ptr(), e_stemr.as_mut_ptr(), &vl, &vu, &il, &iu,
            &mut m_out, w.as_mut_ptr(), z.as_mut_ptr(), &ni, &nzc, isuppz.as_mut_ptr(),
            &mut tryrac, work_q.as_mut_ptr(), &m1, iwork_q.as_mut_ptr(), &m1, &mut info,
        );
    }
    check("dstemr(query)", info)?;
    let lwork = work_q[0] as i32;
    let liwork = iwork_q[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        dstemr_(
            &jobz, &range, &ni, d_stemr.as_mut_ptr(), e_stemr.as_mut_ptr(), &vl, &vu, &il, &iu,
            &mut m_out, w.as_mut_ptr(), z.as_mut_ptr(), &ni, &nzc, isuppz.as_mut_ptr(),
            &mut tryrac, work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    check("dstemr", info)?;
    if m_out as usize != m_count {
        return Err(Error::Lapack {
            routine: "dstemr(count)",
            info: m_out,
        });
    }
    w.truncate(m_count);

    // Back-transform: Z := Q Z.
    let (side, trans) = (b'L' as c_char, b'N' as c_char);
    let mi = ni;
    let nvec = m_count as i32;
    let mut work_q = [0.0f64];
    unsafe {
        dormtr_(
            &side, &uplo, &trans, &mi, &nvec, a.as_ptr(), &ni, tau.as_ptr(), z.as_mut_ptr(), &ni,
            work_q.as_mut_ptr(), &m1, &mut info,
        );
    }
    check("dormtr(query)", info)?;
    let lwork = work_q[0] as i32;
    let mut work = vec![0.0f64; lwork as usize];
    unsafe {
        dormtr_(
            &side, &uplo, &trans, &mi, &nvec, a.as_ptr(), &ni, tau.as_ptr(), z.as_mut_ptr(), &ni,
            work.as_mut_ptr(), &lwork, &mut info,
        );
    }
    check("dormtr", info)?;

    Ok(WindowEig {
        all_values,
        window_values: w,
        first_index,
        vectors: z,
    })
}

/// Full eigendecomposition of a complex Hermitian matrix (column-major, n×n)
/// via `zheevd`. Returns ascending eigenvalues and column-major eigenvectors.
pub fn herm_eig_full(mut a: Vec<Complex64>, n: usize) -> Result<(Vec<f64>, Vec<Complex64>), Error> {
    assert_eq!(a.len(), n * n);
    let ni = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    let (jobz, uplo) = (b'V' as c_char, b'L' as c_char);
    let m1 = -1i32;
    let mut work_q = [Complex64::new(0.0, 0.0)];
    let mut rwork_q = [0.0f64];
    let mut iwork_q = [0i32];
    unsafe {
        zheevd_(
            &jobz, &uplo, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), work_q.as_mut_ptr(), &m1,
            rwork_q.as_mut_ptr(), &m1, iwork_q.as_mut_ptr(), &m1, &mut info,
        );
    }
    check("zheevd(query)", info)?;
    let lwork = work_q[0].re as i32;
    let lrwork = rwork_q[0] as i32;
    let liwork = iwork_q[0];
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        zheevd_(
            &jobz, &uplo, &ni, a.as_mut_ptr(), &ni, w.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            rwork.as_mut_ptr(), &lrwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    check("zheevd", info)?;
    Ok((w, a))
}

/// Schur decomposition of a complex matrix (column-major, n×n) via `zgees`.
///
/// For the normal (unitary) inputs this crate feeds it, the Schur form is
/// diagonal, so the Schur vectors are an orthonormal eigenbasis. Returns
/// the eigenvalues and the unitary factor, column-major.
pub fn schur(mut a: Vec<Complex64>, n: usize) -> Result<(Vec<Complex64>, Vec<Complex64>), Error> {
    assert_eq!(a.len(), n * n);
    let ni = n as i32;
    let mut info = 0i32;
    let (jobvs, sort) = (b'V' as c_char, b'N' as c_char);
    let mut sdim = 0i32;
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut vs = vec![Complex64::new(0.0, 0.0); n * n];
    let mut rwork = vec![0.0f64; n];
    let mut bwork = vec![0i32; 1];
    let m1 = -1i32;
    let mut work_q = [Complex64::new(0.0, 0.0)];
    unsafe {
        zgees_(
            &jobvs, &sort, std::ptr::null(), &ni, a.as_mut_ptr(), &ni, &mut sdim, w.as_mut_ptr(),
            vs.as_mut_ptr(), &ni, work_q.as_mut_ptr(), &m1, rwork.as_mut_ptr(),
            bwork.as_mut_ptr(), &mut info,
        );
    }
    check("zgees(query)", info)?;
    let lwork = work_q[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    unsafe {
        zgees_(
            &jobvs, &sort, std::ptr::null(), &ni, a.as_mut_ptr(), &ni, &mut sdim, w.as_mut_ptr(),
            vs.as_mut_ptr(), &ni, work.as_mut_ptr(), &lwork, rwork.as_mut_ptr(),
            bwork.as_mut_ptr(), &mut info,
        );
    }
    check("zgees", info)?;
    Ok((w, vs))
}
