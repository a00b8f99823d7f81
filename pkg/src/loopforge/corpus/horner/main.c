extern int coeff[16];
int horner(int x, int degree, int modulus);

int main(int x, int d) {
    int i;
    for (i = 0; i < 16; i++)
        coeff[i] = (x * i + d) & 127;
    return horner(x & 1023, d & 15, 10007) + horner(-x & 255, 15 - (d & 15), 97);
}
