int isqrt(int v);

int main(int a, int b) {
    int s = 0;
    int i;
    a = a & 65535;
    for (i = 0; i < 8; i++)
        s += isqrt(a + i * (b & 255));
    return s;
}
