int isqrt(int v) {
    int x;
    int y;
    if (v <= 0)
        return 0;
    x = v;
    y = (x + 1) / 2;
    while (y < x) {
        x = y;
        y = (x + v / x) / 2;
    }
    return x;
}
