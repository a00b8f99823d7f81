int ma[64];
int mb[64];
int mc[64];

void matmul(int n) {
    int i;
    int j;
    int k;
    for (i = 0; i < n; i++) {
        for (j = 0; j < n; j++) {
            int s = 0;
            for (k = 0; k < n; k++)
                s += ma[i * 8 + k] * mb[k * 8 + j];
            mc[i * 8 + j] = s;
        }
    }
}
