int keys[200];

void fill_keys(int seed) {
    int i;
    for (i = 0; i < 200; i++) {
        seed = seed * 1664525 + 1013904223;
        keys[i] = (seed >> 20) & 255;
    }
}
