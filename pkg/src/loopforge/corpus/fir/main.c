void make_signal(int seed);
int fir(int n, int shift);

int main(int seed, int n) {
    make_signal(seed);
    return fir((n & 63) + 8, seed & 3);
}
