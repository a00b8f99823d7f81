int line_of_sight(int x0, int y0, int x1, int y1, int size);
void grid_fill(int seed, int density);

int main(int seed, int density) {
    int visible = 0;
    int k;
    grid_fill(seed, density & 7);
    for (k = 0; k < 24; k++) {
        int a = (seed + k * 7) & 15;
        int b = (seed >> 4) + k * 3 & 15;
        int c = (k * 5 + 3) & 15;
        int d = (seed * k) & 15;
        if (!line_of_sight(a, b, c, d, 16))
            visible++;
    }
    return visible;
}
