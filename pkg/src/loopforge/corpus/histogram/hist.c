extern int samples[128];
int bins[16];

int histogram(int n) {
    int i;
    int peak = 0;
    for (i = 0; i < n; i++) {
        int v = samples[i] % 16;
        if (v < 0)
            v += 16;
        bins[v] = bins[v] + 1;
        if (bins[v] > peak)
            peak = bins[v];
    }
    return peak;
}
