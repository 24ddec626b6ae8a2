/* Exact real-root counting for double-coefficient polynomials (GMP).
 *
 * Each IEEE double converts exactly to an integer times a common power of
 * two. The subresultant Sturm chain is built over Z; every stored element
 * is a nonzero rational multiple of the canonical chain element
 * p_{i+1} = -rem(p_{i-1}, p_i), with the sign of that multiple tracked, so
 * sign variations at -inf/+inf are those of the canonical chain. The
 * returned value V(-inf) - V(+inf) is the exact number of distinct real
 * roots.
 */
#define PY_SSIZE_T_CLEAN
#include <Python.h>
#include <gmp.h>
#include <math.h>
#include <stdint.h>
#include <stdlib.h>

typedef struct {
    int cap;
    mpz_t *A, *B, *R;
    mpz_t g, h, beta, t1, t2, lb, coef;
} ws_t;

static int ws_init(ws_t *w, int cap) {
    w->cap = cap;
    w->A = malloc(sizeof(mpz_t) * cap);
    w->B = malloc(sizeof(mpz_t) * cap);
    w->R = malloc(sizeof(mpz_t) * cap);
    if (!w->A || !w->B || !w->R) return -1;
    for (int i = 0; i < cap; i++) { mpz_init(w->A[i]); mpz_init(w->B[i]); mpz_init(w->R[i]); }
    mpz_init(w->g); mpz_init(w->h); mpz_init(w->beta);
    mpz_init(w->t1); mpz_init(w->t2); mpz_init(w->lb); mpz_init(w->coef);
    return 0;
}

static void ws_clear(ws_t *w) {
    for (int i = 0; i < w->cap; i++) { mpz_clear(w->A[i]); mpz_clear(w->B[i]); mpz_clear(w->R[i]); }
    free(w->A); free(w->B); free(w->R);
    mpz_clear(w->g); mpz_clear(w->h); mpz_clear(w->beta);
    mpz_clear(w->t1); mpz_clear(w->t2); mpz_clear(w->lb); mpz_clear(w->coef);
}

/* exact conversion; returns degree, -1 for the zero polynomial, -2 if any
 * coefficient is not finite */
static int load_poly(mpz_t *out, const double *c, int len) {
    int deg = -1, minsh = 1 << 30;
    for (int i = 0; i < len; i++) {
        if (!isfinite(c[i])) return -2;
        if (c[i] != 0.0) deg = i;
    }
    if (deg < 0) return -1;
    for (int i = 0; i <= deg; i++) {
        if (c[i] == 0.0) continue;
        int e;
        (void)frexp(c[i], &e);
        if (e - 53 < minsh) minsh = e - 53;
    }
    for (int i = 0; i <= deg; i++) {
        if (c[i] == 0.0) { mpz_set_ui(out[i], 0); continue; }
        int e;
        double m = frexp(c[i], &e);
        int64_t mant = (int64_t)ldexp(m, 53);
        mpz_set_si(out[i], mant);
        int sh = (e - 53) - minsh;
        if (sh > 0) mpz_mul_2exp(out[i], out[i], (mp_bitcnt_t)sh);
    }
    return deg;
}

/* number of distinct real roots of sum_i c[i] x^i; negative on error */
static int sturm_count(ws_t *w, const double *c, int len) {
    if (len > w->cap - 1) return -3;
    int degA = load_poly(w->A, c, len);
    if (degA < 0) return degA;
    if (degA == 0) return 0;
    for (int i = 1; i <= degA; i++) mpz_mul_ui(w->B[i - 1], w->A[i], (unsigned long)i);
    int degB = degA - 1;

    int nmax = degA + 2;
    int *sgnlead = malloc(sizeof(int) * 2 * nmax);
    if (!sgnlead) return -5;
    int *degs = sgnlead + nmax;
    int nel = 0;
    sgnlead[nel] = mpz_sgn(w->A[degA]); degs[nel++] = degA;
    int sA = 1, sB = 1;
    sgnlead[nel] = sB * mpz_sgn(w->B[degB]); degs[nel++] = degB;

    mpz_set_ui(w->g, 1);
    mpz_set_ui(w->h, 1);
    int first = 1;

    while (degB >= 1) {
        int delta = degA - degB;
        mpz_set(w->lb, w->B[degB]);
        for (int i = 0; i <= degA; i++) mpz_set(w->R[i], w->A[i]);
        int degR = degA, rounds = 0;
        while (degR >= degB) {
            mpz_set(w->coef, w->R[degR]);
            int off = degR - degB;
            for (int i = 0; i < degR; i++) {
                mpz_mul(w->R[i], w->R[i], w->lb);
                int j = i - off;
                if (j >= 0 && j < degB) mpz_submul(w->R[i], w->coef, w->B[j]);
            }
            degR--;
            rounds++;
            while (degR >= 0 && mpz_sgn(w->R[degR]) == 0) degR--;
            if (degR < 0) break;
        }
        for (int k = rounds; k <= delta && degR >= 0; k++)
            for (int i = 0; i <= degR; i++) mpz_mul(w->R[i], w->R[i], w->lb);
        if (degR < 0) break; /* nontrivial gcd; truncated chain still valid */

        if (first) {
            mpz_set_si(w->beta, ((delta + 1) % 2 == 0) ? 1 : -1);
            first = 0;
        } else {
            mpz_pow_ui(w->t1, w->h, (unsigned long)delta);
            mpz_mul(w->beta, w->g, w->t1);
            mpz_neg(w->beta, w->beta);
        }
        for (int i = 0; i <= degR; i++) mpz_divexact(w->R[i], w->R[i], w->beta);

        int slb = mpz_sgn(w->lb);
        int spow = ((delta + 1) % 2 == 0) ? 1 : slb;
        int sNext = -sA * spow * mpz_sgn(w->beta);

        mpz_set(w->g, w->lb);
        if (delta == 1) {
            mpz_set(w->h, w->g);
        } else if (delta > 1) {
            mpz_pow_ui(w->t1, w->g, (unsigned long)delta);
            mpz_pow_ui(w->t2, w->h, (unsigned long)(delta - 1));
            mpz_divexact(w->h, w->t1, w->t2);
        }

        mpz_t *tmp = w->A; w->A = w->B; w->B = w->R; w->R = tmp;
        degA = degB; degB = degR;
        sA = sB; sB = sNext;
        sgnlead[nel] = sB * mpz_sgn(w->B[degB]);
        degs[nel++] = degB;
    }

    int vminus = 0, vplus = 0;
    for (int i = 0; i + 1 < nel; i++) {
        int a = sgnlead[i], b = sgnlead[i + 1];
        int am = (degs[i] & 1) ? -a : a;
        int bm = (degs[i + 1] & 1) ? -b : b;
        if (a * b < 0) vplus++;
        if (am * bm < 0) vminus++;
    }
    free(sgnlead);
    return vminus - vplus;
}

/* ---------------- Python bindings ---------------- */

static int get_buffer(PyObject *obj, Py_buffer *view, int ndim) {
    if (PyObject_GetBuffer(obj, view, PyBUF_ND | PyBUF_C_CONTIGUOUS | PyBUF_FORMAT) < 0)
        return -1;
    if (view->ndim != ndim || view->itemsize != sizeof(double) ||
        (view->format && view->format[0] != 'd')) {
        PyBuffer_Release(view);
        PyErr_SetString(PyExc_TypeError, "expected a C-contiguous float64 buffer");
        return -1;
    }
    return 0;
}

static PyObject *py_count_one(PyObject *self, PyObject *args) {
    PyObject *obj;
    if (!PyArg_ParseTuple(args, "O", &obj)) return NULL;
    Py_buffer view;
    if (get_buffer(obj, &view, 1) < 0) return NULL;
    int len = (int)view.shape[0];
    int res;
    ws_t w;
    if (ws_init(&w, len + 2) < 0) { PyBuffer_Release(&view); return PyErr_NoMemory(); }
    Py_BEGIN_ALLOW_THREADS
    res = sturm_count(&w, (const double *)view.buf, len);
    Py_END_ALLOW_THREADS
    ws_clear(&w);
    PyBuffer_Release(&view);
    if (res == -1) { PyErr_SetString(PyExc_ValueError, "zero polynomial"); return NULL; }
    if (res == -2) { PyErr_SetString(PyExc_ValueError, "non-finite coefficient"); return NULL; }
    if (res < 0) { PyErr_SetString(PyExc_RuntimeError, "sturm_count failed"); return NULL; }
    return PyLong_FromLong(res);
}

static PyObject *py_count_many(PyObject *self, PyObject *args) {
    PyObject *obj;
    if (!PyArg_ParseTuple(args, "O", &obj)) return NULL;
    Py_buffer view;
    if (get_buffer(obj, &view, 2) < 0) return NULL;
    Py_ssize_t npoly = view.shape[0];
    int len = (int)view.shape[1];
    long *out = malloc(sizeof(long) * (npoly > 0 ? npoly : 1));
    if (!out) { PyBuffer_Release(&view); return PyErr_NoMemory(); }
    int failed = 0;
    ws_t w;
    if (ws_init(&w, len + 2) < 0) { free(out); PyBuffer_Release(&view); return PyErr_NoMemory(); }
    Py_BEGIN_ALLOW_THREADS
    for (Py_ssize_t i = 0; i < npoly; i++) {
        int r = sturm_count(&w, (const double *)view.buf + i * len, len);
        if (r < 0) { failed = r; break; }
        out[i] = r;
    }
    Py_END_ALLOW_THREADS
    ws_clear(&w);
    PyBuffer_Release(&view);
    if (failed) {
        free(out);
        PyErr_SetString(failed == -1 ? PyExc_ValueError : PyExc_RuntimeError,
                        failed == -1 ? "zero polynomial in batch" : "sturm_count failed");
        return NULL;
    }
    PyObject *list = PyList_New(npoly);
    if (!list) { free(out); return NULL; }
    for (Py_ssize_t i = 0; i < npoly; i++)
        PyList_SET_ITEM(list, i, PyLong_FromLong(out[i]));
    free(out);
    return list;
}

static PyMethodDef methods[] = {
    {"count_one", py_count_one, METH_VARARGS,
     "count_one(coeffs) -> exact number of distinct real roots"},
    {"count_many", py_count_many, METH_VARARGS,
     "count_many(coeff_rows) -> list of exact root counts"},
    {NULL, NULL, 0, NULL},
};

static struct PyModuleDef moduledef = {
    PyModuleDef_HEAD_INIT, "_sturmchain",
    "exact Sturm chain root counts over GMP integers", -1, methods,
};

PyMODINIT_FUNC PyInit__sturmchain(void) { return PyModule_Create(&moduledef); }
