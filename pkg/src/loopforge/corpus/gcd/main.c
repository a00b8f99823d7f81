int gcd(int a, int b);

int main(int x, int y) {
    int acc = 0;
    int i;
    x = x & 4095;
    y = y & 4095;
    for (i = 1; i <= 16; i++)
        acc += gcd(x + i, y * i + 1);
    return acc;
}
