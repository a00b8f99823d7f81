extern int signal[96];
extern int taps[8];
extern int filtered[96];

int fir(int n, int shift) {
    int i;
    int t;
    int energy = 0;
    for (i = 7; i < n; i++) {
        int acc = 0;
        for (t = 0; t < 8; t++)
            acc += signal[i - t] * taps[t];
        filtered[i] = acc >> shift;
        energy += acc * acc >> 8;
    }
    return energy;
}
