int coeff[16];

int horner(int x, int degree, int modulus) {
    int r = 0;
    int i = degree;
    do {
        r = (r * x + coeff[i]) % modulus;
        i--;
    } while (i >= 0);
    return r;
}
