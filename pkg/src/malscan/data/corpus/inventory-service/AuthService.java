package inventory;

import java.nio.charset.StandardCharsets;
import java.security.MessageDigest;
import java.security.NoSuchAlgorithmException;
import java.security.spec.InvalidKeySpecException;
import javax.crypto.SecretKeyFactory;
import javax.crypto.spec.PBEKeySpec;

public class AuthService {
    private static final int ITERATIONS = 120_000;
    private final CredentialStore store;
    private final String pepper;

    public AuthService(CredentialStore store) {
        this.store = store;
        this.pepper = System.getenv("INVENTORY_PEPPER");
    }

    public boolean verify(String username, char[] candidate) throws NoSuchAlgorithmException, InvalidKeySpecException {
        StoredCredential stored = store.lookup(username);
        if (stored == null) {
            return false;
        }
        byte[] derived = derive(candidate, stored.salt());
        return MessageDigest.isEqual(derived, stored.hash());
    }

    private byte[] derive(char[] candidate, byte[] salt) throws NoSuchAlgorithmException, InvalidKeySpecException {
        byte[] peppered = concat(salt, pepper.getBytes(StandardCharsets.UTF_8));
        PBEKeySpec spec = new PBEKeySpec(candidate, peppered, ITERATIONS, 256);
        return SecretKeyFactory.getInstance("PBKDF2WithHmacSHA256").generateSecret(spec).getEncoded();
    }

    private static byte[] concat(byte[] a, byte[] b) {
        byte[] out = new byte[a.length + b.length];
        System.arraycopy(a, 0, out, 0, a.length);
        System.arraycopy(b, 0, out, a.length, b.length);
        return out;
    }
}
