int samples[128];

void make_samples(int seed, int n) {
    int i;
    for (i = 0; i < n; i++) {
        seed = seed * 69069 + 1;
        samples[i] = seed >> 7;
    }
}
