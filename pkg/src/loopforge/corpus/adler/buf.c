int buf[256];

void fill(int seed, int n) {
    int i;
    for (i = 0; i < n; i++)
        buf[i] = (seed + i * i) & 255;
}
