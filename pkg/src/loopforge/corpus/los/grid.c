int grid[256];

void grid_fill(int seed, int density) {
    int i;
    int s = seed;
    for (i = 0; i < 256; i++) {
        s = s * 1103515245 + 12345;
        grid[i] = ((s >> 16) & 15) < density;
    }
}
